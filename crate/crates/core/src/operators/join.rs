//! Equi hash join: builds on the left input, probes with the right.

use std::sync::Arc;

use super::capture::{resolve_targets, seal, CaptureMode, CaptureSpec, Recorder, Shape, Target};
use super::collect::{collect, OutputColumn};
use super::groupby::edges_index;
use super::pipeline::{JoinTable, Pipeline, Step};
use super::{joined_names, OperatorOutput};
use crate::error::Result;
use crate::expr::Expr;
use crate::lineage::{BundleData, LineageBundle, LineageMap, RelationLineage, Rid, RidArray, MISS};
use crate::relstore::{Field, Relation, Schema};

#[derive(Clone, Copy, Debug, Default)]
pub struct JoinOptions {
    /// Build keys are unique; each probe row matches at most once.
    pub pkfk: bool,
}

fn join_outputs(a: &Relation, b: &Relation) -> Vec<OutputColumn> {
    let names = joined_names(a, b);
    let mut out = Vec::with_capacity(names.len());
    let mut names = names.into_iter();
    for (slot, rel) in [(0, a), (1, b)] {
        for (i, f) in rel.schema().fields().iter().enumerate() {
            out.push((names.next().expect("one name per column"), Expr::col(slot, i, &f.name)));
        }
    }
    out
}

/// `a ⋈ b` on `a_keys = b_keys`. Output rows follow probe order; the matches
/// of one probe row follow build insertion order.
pub fn hashjoin(
    a: &OperatorOutput,
    b: &OperatorOutput,
    a_keys: &[usize],
    b_keys: &[usize],
    opts: JoinOptions,
    capture: &CaptureSpec,
) -> Result<OperatorOutput> {
    let parts = Arc::new(vec![a.clone(), b.clone()]);
    let ak: Vec<Expr> = a_keys
        .iter()
        .map(|&c| Expr::col(0, c, &a.relation.schema().field(c).name))
        .collect();
    let bk: Vec<Expr> = b_keys
        .iter()
        .map(|&c| Expr::col(1, c, &b.relation.schema().field(c).name))
        .collect();
    let table = Arc::new(JoinTable::build(&Pipeline::scan(parts.clone(), 0), &ak, vec![0], opts.pkfk)?);
    let name = format!("join({},{})", a.relation.name(), b.relation.name());
    let row_unique = [false, opts.pkfk];
    let outputs = join_outputs(&a.relation, &b.relation);

    if capture.mode == CaptureMode::Defer {
        let targets = resolve_targets(&parts, &[0, 1], &row_unique, capture)?;
        let plain = targets
            .iter()
            .all(|t| t.opts.partition.is_none() && t.opts.cube.is_none());
        let a_single = targets
            .iter()
            .filter(|t| t.tracer.slot == 0)
            .all(|t| t.tracer.is_single_valued());
        if plain && a_single {
            return defer_join(&parts, table, &bk, outputs, &name, targets, opts.pkfk);
        }
    }
    let p = Pipeline::scan(parts.clone(), 1).with_step(Step::Probe { table, keys: bk });
    let cap = opts.pkfk.then(|| b.relation.row_count());
    collect(&p, &outputs, &name, &capture.clone(), &row_unique, cap)
}

fn defer_join(
    parts: &Arc<Vec<OperatorOutput>>,
    table: Arc<JoinTable>,
    bk: &[Expr],
    outputs: Vec<OutputColumn>,
    name: &str,
    targets: Vec<Target>,
    pkfk: bool,
) -> Result<OperatorOutput> {
    let (a_targets, b_targets): (Vec<Target>, Vec<Target>) =
        targets.into_iter().partition(|t| t.tracer.slot == 0);
    let b_shapes = b_targets
        .iter()
        .map(|t| {
            let bw = if t.tracer.is_single_valued() { Shape::Array } else { Shape::Index };
            (bw, if t.functional() { Shape::Array } else { Shape::Index })
        })
        .collect();
    let rel_b = parts[1].relation.clone();
    let cap = pkfk.then(|| rel_b.row_count());
    let mut rec = Recorder::new(CaptureMode::Inject, b_targets, b_shapes, cap, rel_b.row_count());
    let rels: Vec<&Relation> = parts.iter().map(|p| p.relation.as_ref()).collect();

    // Output ranges per entry: one start rid per matching probe row.
    let mut starts: Vec<Vec<Rid>> = vec![Vec::new(); table.len()];
    let mut a_rids: Vec<Rid> = Vec::new();
    let mut b_rids: Vec<Rid> = Vec::new();
    let mut row: Vec<Rid> = vec![0; 2];
    let mut key: Vec<_> = Vec::with_capacity(bk.len());
    for r in 0..rel_b.row_count() as Rid {
        row[1] = r;
        key.clear();
        key.extend(bk.iter().map(|k| k.eval(&row, &rels)));
        let Some(e) = table.lookup(&key) else { continue };
        starts[e].push(a_rids.len() as Rid);
        for &ar in table.tuples(e) {
            let o = a_rids.len() as Rid;
            a_rids.push(ar);
            b_rids.push(r);
            row[0] = ar;
            rec.row_slot(1, o, &row);
        }
    }
    let n = a_rids.len();
    let b_data = rec.finish(n)?;

    let fields = outputs
        .iter()
        .map(|(n, e)| Ok(Field::new(n.clone(), e.dtype(&rels)?)))
        .collect::<Result<Vec<_>>>()?;
    let schema = Schema::new(fields)?;
    let columns = outputs
        .iter()
        .map(|(_, e)| match e {
            Expr::Col { slot: 0, col, .. } => rels[0].column(*col).take(&a_rids),
            Expr::Col { col, .. } => rels[1].column(*col).take(&b_rids),
            _ => unreachable!("join outputs are plain columns"),
        })
        .collect();
    let relation = Arc::new(Relation::new(name, schema, columns)?);
    drop(a_rids);
    drop(b_rids);

    if a_targets.is_empty() {
        return Ok(OperatorOutput {
            relation,
            bundle: {
                let captured = !b_data.relations.is_empty();
                seal(b_data, n, captured)
            },
        });
    }
    let bundle = LineageBundle::pending(n, move || {
        let mut data = BundleData::default();
        for t in &a_targets {
            let mut bw = t.opts.backward.then(|| RidArray::filled(n, MISS));
            let mut edges: Vec<(Rid, Rid)> = Vec::new();
            let mut row = [0 as Rid; 2];
            for (e, st) in starts.iter().enumerate() {
                let tuples = table.tuples(e);
                for &o0 in st {
                    for (k, &ar) in tuples.iter().enumerate() {
                        let o = o0 + k as Rid;
                        row[0] = ar;
                        t.tracer.for_each(&row, |b| {
                            if let (Some(p), Some(base)) = (&t.opts.predicate, t.opts.base.as_deref()) {
                                if !p.eval_bool(&[b], &[base]) {
                                    return;
                                }
                            }
                            if let Some(bw) = &mut bw {
                                bw.set(o as usize, b);
                            }
                            if t.opts.forward {
                                edges.push((b, o));
                            }
                        });
                    }
                }
            }
            data.relations.insert(
                t.name.clone(),
                RelationLineage {
                    backward: bw.map(LineageMap::Array),
                    forward: t.opts.forward.then(|| LineageMap::Index(edges_index(edges, t.base_len))),
                    cube: None,
                    base_len: t.base_len,
                },
            );
        }
        data.relations.extend(b_data.relations);
        data
    });
    Ok(OperatorOutput {
        relation,
        bundle: Some(Arc::new(bundle)),
    })
}
