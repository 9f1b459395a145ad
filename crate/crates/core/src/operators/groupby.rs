//! Hash aggregation with inject, defer and callback lineage capture.

use std::sync::Arc;

use smallvec::SmallVec;

use super::agg::{AggAcc, AggSpec};
use super::capture::{resolve_targets, seal, sort_buckets, CaptureMode, CaptureSpec, Recorder, Shape, Target};
use super::pipeline::{Key, KeyTable, Pipeline};
use super::OperatorOutput;
use crate::error::Result;
use crate::expr::Expr;
use crate::lineage::{BundleData, LineageBundle, LineageMap, RelationLineage, Rid, RidArray, RidIndex, MISS};
use crate::relstore::{Column, Field, Relation, Schema};

/// Grouping keys and aggregates, each with its output column name.
#[derive(Clone, Debug, Default)]
pub struct GroupSpec {
    pub keys: Vec<(String, Expr)>,
    pub aggs: Vec<(String, AggSpec)>,
}

impl GroupSpec {
    pub fn schema(&self, rels: &[&Relation]) -> Result<Schema> {
        let mut fields = Vec::with_capacity(self.keys.len() + self.aggs.len());
        for (n, e) in &self.keys {
            fields.push(Field::new(n.clone(), e.dtype(rels)?));
        }
        for (n, a) in &self.aggs {
            fields.push(Field::new(n.clone(), a.output_type()));
        }
        Schema::new(fields)
    }
}

#[inline]
fn eval_key(keys: &[(String, Expr)], row: &[Rid], rels: &[&Relation], key: &mut Key) {
    key.clear();
    key.extend(keys.iter().map(|(_, e)| e.eval(row, rels)));
}

/// Groups the rows of `p`. Output rows follow first-appearance order of keys.
/// A global aggregate over no rows yields no rows.
pub fn run_groupby(
    p: Arc<Pipeline>,
    spec: &GroupSpec,
    name: &str,
    capture: &CaptureSpec,
    row_unique: &[bool],
) -> Result<OperatorOutput> {
    let rels = p.rels();
    let schema = spec.schema(&rels)?;
    let targets = resolve_targets(&p.parts, &p.bound_slots(), row_unique, capture)?;
    let captured = !targets.is_empty();
    let mut mode = capture.mode;
    if mode == CaptureMode::Defer
        && targets
            .iter()
            .any(|t| t.opts.partition.is_some() || t.opts.cube.is_some())
    {
        mode = CaptureMode::Inject;
    }

    let na = spec.aggs.len();
    let mut table = KeyTable::default();
    let mut accs: Vec<AggAcc> = Vec::new();
    let mut key: Key = SmallVec::new();
    let mut update = |row: &[Rid]| -> u32 {
        eval_key(&spec.keys, row, &rels, &mut key);
        let (g, new) = table.find_or_insert(&key);
        if new {
            accs.extend(spec.aggs.iter().map(|(_, a)| a.init()));
        }
        let at = g as usize * na;
        for (acc, (_, a)) in accs[at..at + na].iter_mut().zip(&spec.aggs) {
            a.update(acc, row, &rels);
        }
        g
    };

    enum Captured {
        None,
        Ready(Recorder),
        Deferred(Vec<Target>, Vec<Vec<u32>>),
    }
    let result = match mode {
        _ if !captured => {
            p.run(|row| {
                update(row);
            });
            Captured::None
        }
        CaptureMode::Defer => {
            let mut counts: Vec<Vec<u32>> = vec![Vec::new(); targets.len()];
            p.run(|row| {
                let g = update(row) as usize;
                for (c, t) in counts.iter_mut().zip(&targets) {
                    if c.len() <= g {
                        c.resize(g + 1, 0);
                    }
                    c[g] += t.tracer.count(row) as u32;
                }
            });
            Captured::Deferred(targets, counts)
        }
        _ => {
            let shapes = targets
                .iter()
                .map(|t| (Shape::Index, if t.functional() { Shape::Array } else { Shape::Index }))
                .collect();
            let mut rec = Recorder::new(mode, targets, shapes, None, p.source_len());
            p.run(|row| {
                let g = update(row);
                rec.row(g, row);
            });
            Captured::Ready(rec)
        }
    };
    drop(update);

    let n = table.len();
    let mut columns: Vec<Column> = schema
        .fields()
        .iter()
        .map(|f| Column::with_capacity(f.dtype, n))
        .collect();
    for (g, k) in table.keys().iter().enumerate() {
        for (c, v) in columns.iter_mut().zip(k.iter()) {
            c.push(v.clone())?;
        }
        for (c, acc) in columns[spec.keys.len()..].iter_mut().zip(&accs[g * na..(g + 1) * na]) {
            c.push(acc.finish())?;
        }
    }
    let relation = Arc::new(Relation::new(name, schema, columns)?);
    let bundle = match result {
        Captured::None => None,
        Captured::Ready(rec) => seal(rec.finish(n)?, n, true),
        Captured::Deferred(targets, counts) => {
            let keys: Vec<(String, Expr)> = spec.keys.clone();
            Some(Arc::new(LineageBundle::pending(n, move || {
                defer_finalize(&p, &keys, table, targets, counts, n)
            })))
        }
    };
    Ok(OperatorOutput { relation, bundle })
}

enum FwDefer {
    Off,
    Array(RidArray),
    Edges(Vec<(Rid, Rid)>),
}

/// Second pass of deferred capture: every group id is known, so backward
/// buckets are allocated at their final size.
fn defer_finalize(
    p: &Pipeline,
    keys: &[(String, Expr)],
    table: KeyTable,
    targets: Vec<Target>,
    counts: Vec<Vec<u32>>,
    n: usize,
) -> BundleData {
    let rels = p.rels();
    let mut bws: Vec<Option<Vec<RidArray>>> = targets
        .iter()
        .zip(&counts)
        .map(|(t, c)| {
            t.opts.backward.then(|| {
                (0..n)
                    .map(|g| RidArray::with_capacity(c.get(g).copied().unwrap_or(0) as usize))
                    .collect()
            })
        })
        .collect();
    let mut fws: Vec<FwDefer> = targets
        .iter()
        .map(|t| match (t.opts.forward, t.functional()) {
            (false, _) => FwDefer::Off,
            (true, true) => FwDefer::Array(RidArray::filled(t.base_len, MISS)),
            (true, false) => FwDefer::Edges(Vec::new()),
        })
        .collect();
    let mut key: Key = SmallVec::new();
    p.run(|row| {
        eval_key(keys, row, &rels, &mut key);
        let g = table.find(&key).expect("group seen in the first pass");
        for (t, target) in targets.iter().enumerate() {
            let bw = &mut bws[t];
            let fw = &mut fws[t];
            let pred = target.opts.predicate.as_ref().map(|e| (e, target.opts.base.as_deref()));
            target.tracer.for_each(row, |b| {
                if let Some((e, Some(base))) = pred {
                    if !e.eval_bool(&[b], &[base]) {
                        return;
                    }
                }
                if let Some(bw) = bw {
                    bw[g as usize].push(b);
                }
                match fw {
                    FwDefer::Off => {}
                    FwDefer::Array(a) => a.set(b as usize, g),
                    FwDefer::Edges(e) => e.push((b, g)),
                }
            });
        }
    });
    let mut data = BundleData::default();
    for ((t, bw), fw) in targets.iter().zip(bws).zip(fws) {
        let forward = match fw {
            FwDefer::Off => None,
            FwDefer::Array(a) => Some(LineageMap::Array(a)),
            FwDefer::Edges(e) => Some(LineageMap::Index(edges_index(e, t.base_len))),
        };
        data.relations.insert(
            t.name.clone(),
            RelationLineage {
                backward: bw.map(|b| LineageMap::Index(RidIndex::from_buckets(b))),
                forward,
                cube: None,
                base_len: t.base_len,
            },
        );
    }
    data
}

/// Exactly sized index from (bucket, rid) pairs, buckets ascending.
pub(crate) fn edges_index(edges: Vec<(Rid, Rid)>, n: usize) -> RidIndex {
    let mut sizes = vec![0usize; n];
    for &(b, _) in &edges {
        sizes[b as usize] += 1;
    }
    let mut ix = RidIndex::new(n, Some(&sizes));
    for (b, o) in edges {
        ix.push(b as usize, o);
    }
    sort_buckets(ix)
}

/// Operator-level group-by over columns of `input`.
pub fn groupby(
    input: &OperatorOutput,
    key_cols: &[usize],
    aggs: Vec<(String, AggSpec)>,
    capture: &CaptureSpec,
) -> Result<OperatorOutput> {
    let rel = &input.relation;
    let keys = key_cols
        .iter()
        .map(|&c| {
            let n = &rel.schema().field(c).name;
            (n.clone(), Expr::col(0, c, n))
        })
        .collect();
    let spec = GroupSpec { keys, aggs };
    let name = format!("groupby({})", rel.name());
    let p = Arc::new(Pipeline::scan(Arc::new(vec![input.clone()]), 0));
    run_groupby(p, &spec, &name, capture, &[true])
}
