//! Set and bag union, intersection and difference over whole rows.
//!
//! Output rows follow first appearance in the left input, then the right.

use std::sync::Arc;

use smallvec::SmallVec;

use super::capture::{resolve_targets, seal, CaptureMode, CaptureSpec, Recorder, Shape, Target};
use super::groupby::edges_index;
use super::pipeline::{Key, KeyTable};
use super::OperatorOutput;
use crate::error::{Error, Result};
use crate::lineage::{BundleData, LineageBundle, LineageMap, RelationLineage, Rid, RidArray, RidIndex, MISS};
use crate::relstore::{Column, Relation};

fn check_compatible(a: &Relation, b: &Relation) -> Result<()> {
    let at: Vec<_> = a.schema().fields().iter().map(|f| f.dtype).collect();
    let bt: Vec<_> = b.schema().fields().iter().map(|f| f.dtype).collect();
    if at != bt {
        return Err(Error::Schema(format!(
            "set operation over incompatible schemas of {} and {}",
            a.name(),
            b.name()
        )));
    }
    Ok(())
}

#[inline]
fn row_key(rel: &Relation, r: Rid, key: &mut Key) {
    key.clear();
    key.extend(rel.columns().iter().map(|c| c.get(r as usize)));
}

fn relation_from_keys<'a>(
    name: String,
    like: &Relation,
    rows: impl Iterator<Item = &'a Key>,
) -> Result<Arc<Relation>> {
    let mut cols: Vec<Column> = like.schema().fields().iter().map(|f| Column::empty(f.dtype)).collect();
    for k in rows {
        for (c, v) in cols.iter_mut().zip(k.iter()) {
            c.push(v.clone())?;
        }
    }
    Ok(Arc::new(Relation::new(name, like.schema().clone(), cols)?))
}

struct Setup {
    targets: Vec<Target>,
    mode: CaptureMode,
}

fn setup(a: &OperatorOutput, b: &OperatorOutput, capture: &CaptureSpec, row_unique: [bool; 2]) -> Result<Setup> {
    check_compatible(&a.relation, &b.relation)?;
    let parts = Arc::new(vec![a.clone(), b.clone()]);
    let targets = resolve_targets(&parts, &[0, 1], &row_unique, capture)?;
    let mut mode = capture.mode;
    if mode == CaptureMode::Defer
        && targets
            .iter()
            .any(|t| t.opts.partition.is_some() || t.opts.cube.is_some())
    {
        mode = CaptureMode::Inject;
    }
    if targets.is_empty() {
        mode = CaptureMode::None;
    }
    Ok(Setup { targets, mode })
}

fn shapes(targets: &[Target], multi_out: bool) -> Vec<(Shape, Shape)> {
    targets
        .iter()
        .map(|t| {
            let bw = if multi_out || !t.tracer.is_single_valued() { Shape::Index } else { Shape::Array };
            (bw, if t.functional() { Shape::Array } else { Shape::Index })
        })
        .collect()
}

enum BwC {
    Off,
    Array(RidArray),
    Index(Vec<Vec<Rid>>),
}

enum FwC {
    Off,
    Array(RidArray),
    Edges(Vec<(Rid, Rid)>),
}

/// Edge buffers for deferred capture, sized from first-pass counts.
struct Collector {
    targets: Vec<Target>,
    bw: Vec<BwC>,
    fw: Vec<FwC>,
}

impl Collector {
    fn new(targets: Vec<Target>, shapes: &[(Shape, Shape)], n_out: usize, counts: &[Vec<u32>]) -> Self {
        let bw = targets
            .iter()
            .zip(shapes)
            .zip(counts)
            .map(|((t, s), c)| match (t.opts.backward, s.0) {
                (false, _) => BwC::Off,
                (true, Shape::Array) => BwC::Array(RidArray::filled(n_out, MISS)),
                (true, _) => BwC::Index(
                    (0..n_out)
                        .map(|o| Vec::with_capacity(c.get(o).copied().unwrap_or(0) as usize))
                        .collect(),
                ),
            })
            .collect();
        let fw = targets
            .iter()
            .zip(shapes)
            .map(|(t, s)| match (t.opts.forward, s.1) {
                (false, _) => FwC::Off,
                (true, Shape::Array) => FwC::Array(RidArray::filled(t.base_len, MISS)),
                (true, _) => FwC::Edges(Vec::new()),
            })
            .collect();
        Collector { targets, bw, fw }
    }

    #[inline]
    fn row_slot(&mut self, slot: usize, o: Rid, row: &[Rid]) {
        for (t, target) in self.targets.iter().enumerate() {
            if target.tracer.slot != slot {
                continue;
            }
            let (bw, fw) = (&mut self.bw[t], &mut self.fw[t]);
            let pred = target.opts.predicate.as_ref().zip(target.opts.base.as_deref());
            target.tracer.for_each(row, |b| {
                if let Some((p, base)) = pred {
                    if !p.eval_bool(&[b], &[base]) {
                        return;
                    }
                }
                match bw {
                    BwC::Off => {}
                    BwC::Array(a) => a.set(o as usize, b),
                    BwC::Index(v) => v[o as usize].push(b),
                }
                match fw {
                    FwC::Off => {}
                    FwC::Array(a) => a.set(b as usize, o),
                    FwC::Edges(e) => e.push((b, o)),
                }
            });
        }
    }

    fn finish(self) -> BundleData {
        let mut data = BundleData::default();
        for ((t, bw), fw) in self.targets.iter().zip(self.bw).zip(self.fw) {
            let backward = match bw {
                BwC::Off => None,
                BwC::Array(a) => Some(LineageMap::Array(a)),
                BwC::Index(v) => Some(LineageMap::Index(RidIndex::from_vecs(v))),
            };
            let forward = match fw {
                FwC::Off => None,
                FwC::Array(a) => Some(LineageMap::Array(a)),
                FwC::Edges(e) => Some(LineageMap::Index(edges_index(e, t.base_len))),
            };
            data.relations.insert(
                t.name.clone(),
                RelationLineage {
                    backward,
                    forward,
                    cube: None,
                    base_len: t.base_len,
                },
            );
        }
        data
    }
}

/// Adds per-target bucket sizes of `row` to output `o`.
#[inline]
fn count_row(counts: &mut [Vec<u32>], targets: &[Target], slot: usize, o: usize, row: &[Rid]) {
    for (c, t) in counts.iter_mut().zip(targets) {
        if t.tracer.slot != slot {
            continue;
        }
        if c.len() <= o {
            c.resize(o + 1, 0);
        }
        c[o] += t.tracer.count(row) as u32;
    }
}

/// Every output depends on every row of the right input.
fn add_whole(data: &mut BundleData, targets: &[Target], n_out: usize) {
    for t in targets {
        data.relations.insert(
            t.name.clone(),
            RelationLineage {
                backward: t.opts.backward.then_some(LineageMap::Whole {
                    len: n_out,
                    target_len: t.base_len,
                }),
                forward: t.opts.forward.then_some(LineageMap::Whole {
                    len: t.base_len,
                    target_len: n_out,
                }),
                cube: None,
                base_len: t.base_len,
            },
        );
    }
}

fn finish_bundle(mode: CaptureMode, n: usize, ready: Option<BundleData>) -> Option<Arc<LineageBundle>> {
    match (mode, ready) {
        (CaptureMode::None, _) | (_, None) => None,
        (_, Some(d)) => seal(d, n, true),
    }
}

/// Distinct rows of `a ∪ b`.
pub fn set_union(a: &OperatorOutput, b: &OperatorOutput, capture: &CaptureSpec) -> Result<OperatorOutput> {
    let Setup { targets, mode } = setup(a, b, capture, [true, true])?;
    let sh = shapes(&targets, true);
    let mut table = KeyTable::default();
    let mut key: Key = SmallVec::new();
    let mut row = [0 as Rid; 2];
    let (ra, rb) = (a.relation.clone(), b.relation.clone());
    let n_in = ra.row_count() + rb.row_count();
    let mut ready = None;
    match mode {
        CaptureMode::Defer => {
            let mut counts = vec![Vec::new(); targets.len()];
            for (slot, rel) in [(0, &ra), (1, &rb)] {
                for r in 0..rel.row_count() as Rid {
                    row_key(rel, r, &mut key);
                    let (e, _) = table.find_or_insert(&key);
                    row[slot] = r;
                    count_row(&mut counts, &targets, slot, e as usize, &row);
                }
            }
            let n = table.len();
            let keys = table.keys().to_vec();
            let lookup = std::mem::take(&mut table);
            let relation = relation_from_keys(format!("union({},{})", ra.name(), rb.name()), &ra, keys.iter())?;
            let f = move || {
                let mut c = Collector::new(targets, &sh, n, &counts);
                let mut key: Key = SmallVec::new();
                let mut row = [0 as Rid; 2];
                for (slot, rel) in [(0, &ra), (1, &rb)] {
                    for r in 0..rel.row_count() as Rid {
                        row_key(rel, r, &mut key);
                        let e = lookup.find(&key).expect("key seen in the first pass");
                        row[slot] = r;
                        c.row_slot(slot, e, &row);
                    }
                }
                c.finish()
            };
            return Ok(OperatorOutput {
                relation,
                bundle: Some(Arc::new(LineageBundle::pending(n, f))),
            });
        }
        _ => {
            let captured = mode != CaptureMode::None;
            let mut rec = Recorder::new(mode, targets, sh, None, n_in);
            for (slot, rel) in [(0, &ra), (1, &rb)] {
                for r in 0..rel.row_count() as Rid {
                    row_key(rel, r, &mut key);
                    let (e, _) = table.find_or_insert(&key);
                    if captured {
                        row[slot] = r;
                        rec.row_slot(slot, e, &row);
                    }
                }
            }
            if captured {
                ready = Some(rec.finish(table.len())?);
            }
        }
    }
    let relation = relation_from_keys(format!("union({},{})", ra.name(), rb.name()), &ra, table.keys().iter())?;
    let n = relation.row_count();
    Ok(OperatorOutput {
        relation,
        bundle: finish_bundle(mode, n, ready),
    })
}

/// Distinct rows of `a` that also occur in `b`.
pub fn set_intersect(a: &OperatorOutput, b: &OperatorOutput, capture: &CaptureSpec) -> Result<OperatorOutput> {
    let Setup { targets, mode } = setup(a, b, capture, [true, true])?;
    let sh = shapes(&targets, true);
    let (ra, rb) = (a.relation.clone(), b.relation.clone());
    let name = format!("intersect({},{})", ra.name(), rb.name());
    let mut key: Key = SmallVec::new();
    let mut row = [0 as Rid; 2];
    let mut bt = KeyTable::default();
    let mut out = KeyTable::default();
    match mode {
        CaptureMode::Defer => {
            let mut bcounts: Vec<Vec<u32>> = vec![Vec::new(); targets.len()];
            for r in 0..rb.row_count() as Rid {
                row_key(&rb, r, &mut key);
                let (be, _) = bt.find_or_insert(&key);
                row[1] = r;
                count_row(&mut bcounts, &targets, 1, be as usize, &row);
            }
            let mut counts: Vec<Vec<u32>> = vec![Vec::new(); targets.len()];
            for r in 0..ra.row_count() as Rid {
                row_key(&ra, r, &mut key);
                let Some(be) = bt.find(&key) else { continue };
                let (e, new) = out.find_or_insert(&key);
                if new {
                    for ((c, bc), t) in counts.iter_mut().zip(&bcounts).zip(&targets) {
                        if t.tracer.slot == 1 {
                            c.resize(e as usize + 1, 0);
                            c[e as usize] = bc.get(be as usize).copied().unwrap_or(0);
                        }
                    }
                }
                row[0] = r;
                count_row(&mut counts, &targets, 0, e as usize, &row);
            }
            drop(bt);
            let relation = relation_from_keys(name, &ra, out.keys().iter())?;
            let n = relation.row_count();
            let f = move || {
                let mut c = Collector::new(targets, &sh, n, &counts);
                let mut key: Key = SmallVec::new();
                let mut row = [0 as Rid; 2];
                for (slot, rel) in [(0, &ra), (1, &rb)] {
                    for r in 0..rel.row_count() as Rid {
                        row_key(rel, r, &mut key);
                        if let Some(e) = out.find(&key) {
                            row[slot] = r;
                            c.row_slot(slot, e, &row);
                        }
                    }
                }
                c.finish()
            };
            Ok(OperatorOutput {
                relation,
                bundle: Some(Arc::new(LineageBundle::pending(n, f))),
            })
        }
        _ => {
            let captured = mode != CaptureMode::None;
            let mut lists: Vec<Vec<Rid>> = Vec::new();
            for r in 0..rb.row_count() as Rid {
                row_key(&rb, r, &mut key);
                let (be, new) = bt.find_or_insert(&key);
                if captured {
                    if new {
                        lists.push(Vec::new());
                    }
                    lists[be as usize].push(r);
                }
            }
            let mut rec = Recorder::new(mode, targets, sh, None, ra.row_count());
            for r in 0..ra.row_count() as Rid {
                row_key(&ra, r, &mut key);
                let Some(be) = bt.find(&key) else { continue };
                let (e, new) = out.find_or_insert(&key);
                if captured {
                    if new {
                        for &rb in &lists[be as usize] {
                            row[1] = rb;
                            rec.row_slot(1, e, &row);
                        }
                    }
                    row[0] = r;
                    rec.row_slot(0, e, &row);
                }
            }
            let relation = relation_from_keys(name, &ra, out.keys().iter())?;
            let n = relation.row_count();
            let ready = captured.then(|| rec.finish(n)).transpose()?;
            Ok(OperatorOutput {
                relation,
                bundle: finish_bundle(mode, n, ready),
            })
        }
    }
}

/// Distinct rows of `a` that do not occur in `b`. Every output row depends on
/// all of `b`.
pub fn set_diff(a: &OperatorOutput, b: &OperatorOutput, capture: &CaptureSpec) -> Result<OperatorOutput> {
    let Setup { targets, mode } = setup(a, b, capture, [true, true])?;
    let (a_targets, b_targets): (Vec<Target>, Vec<Target>) =
        targets.into_iter().partition(|t| t.tracer.slot == 0);
    let sh = shapes(&a_targets, true);
    let (ra, rb) = (a.relation.clone(), b.relation.clone());
    let name = format!("except({},{})", ra.name(), rb.name());
    let mut key: Key = SmallVec::new();
    let mut bt = KeyTable::default();
    for r in 0..rb.row_count() as Rid {
        row_key(&rb, r, &mut key);
        bt.find_or_insert(&key);
    }
    let mut out = KeyTable::default();
    let mut row = [0 as Rid; 2];
    match mode {
        CaptureMode::Defer => {
            let mut counts: Vec<Vec<u32>> = vec![Vec::new(); a_targets.len()];
            for r in 0..ra.row_count() as Rid {
                row_key(&ra, r, &mut key);
                if bt.find(&key).is_some() {
                    continue;
                }
                let (e, _) = out.find_or_insert(&key);
                row[0] = r;
                count_row(&mut counts, &a_targets, 0, e as usize, &row);
            }
            let relation = relation_from_keys(name, &ra, out.keys().iter())?;
            let n = relation.row_count();
            let f = move || {
                let mut c = Collector::new(a_targets, &sh, n, &counts);
                let mut key: Key = SmallVec::new();
                let mut row = [0 as Rid; 2];
                for r in 0..ra.row_count() as Rid {
                    row_key(&ra, r, &mut key);
                    if let Some(e) = out.find(&key) {
                        row[0] = r;
                        c.row_slot(0, e, &row);
                    }
                }
                let mut data = c.finish();
                add_whole(&mut data, &b_targets, n);
                data
            };
            Ok(OperatorOutput {
                relation,
                bundle: Some(Arc::new(LineageBundle::pending(n, f))),
            })
        }
        _ => {
            let captured = mode != CaptureMode::None;
            let mut rec = Recorder::new(mode, a_targets, sh, None, ra.row_count());
            for r in 0..ra.row_count() as Rid {
                row_key(&ra, r, &mut key);
                if bt.find(&key).is_some() {
                    continue;
                }
                let (e, _) = out.find_or_insert(&key);
                if captured {
                    row[0] = r;
                    rec.row_slot(0, e, &row);
                }
            }
            let relation = relation_from_keys(name, &ra, out.keys().iter())?;
            let n = relation.row_count();
            let ready = captured
                .then(|| {
                    rec.finish(n).map(|mut d| {
                        add_whole(&mut d, &b_targets, n);
                        d
                    })
                })
                .transpose()?;
            Ok(OperatorOutput {
                relation,
                bundle: finish_bundle(mode, n, ready),
            })
        }
    }
}

/// All rows of `a` followed by all rows of `b`.
pub fn bag_union(a: &OperatorOutput, b: &OperatorOutput, capture: &CaptureSpec) -> Result<OperatorOutput> {
    let Setup { targets, mode } = setup(a, b, capture, [true, true])?;
    let (ra, rb) = (a.relation.clone(), b.relation.clone());
    let (na, nb) = (ra.row_count(), rb.row_count());
    let n = na + nb;
    let columns = ra
        .columns()
        .iter()
        .zip(rb.columns())
        .map(|(x, y)| {
            let mut c = Column::with_capacity(x.dtype(), n);
            for col in [x, y] {
                for i in 0..col.len() {
                    c.push(col.get(i)).expect("compatible schemas");
                }
            }
            c
        })
        .collect();
    let name = format!("union_all({},{})", ra.name(), rb.name());
    let relation = Arc::new(Relation::new(name, ra.schema().clone(), columns)?);
    if mode == CaptureMode::None {
        return Ok(OperatorOutput { relation, bundle: None });
    }
    let data = if targets.iter().all(|t| t.tracer.is_identity() && t.opts.predicate.is_none()) && mode != CaptureMode::Callback
        && targets.iter().all(|t| t.opts.partition.is_none() && t.opts.cube.is_none())
    {
        let mut data = BundleData::default();
        for t in &targets {
            let (lo, len) = if t.tracer.slot == 0 { (0, na) } else { (na, nb) };
            data.relations.insert(
                t.name.clone(),
                RelationLineage {
                    backward: t.opts.backward.then_some(LineageMap::Shift {
                        len: n,
                        lo: lo as Rid,
                        hi: (lo + len) as Rid,
                        delta: -(lo as i64),
                    }),
                    forward: t.opts.forward.then_some(LineageMap::Shift {
                        len,
                        lo: 0,
                        hi: len as Rid,
                        delta: lo as i64,
                    }),
                    cube: None,
                    base_len: t.base_len,
                },
            );
        }
        data
    } else {
        let mode = if mode == CaptureMode::Defer { CaptureMode::Inject } else { mode };
        let sh = shapes(&targets, false);
        let mut rec = Recorder::new(mode, targets, sh, Some(n), n);
        let mut row = [0 as Rid; 2];
        for r in 0..na as Rid {
            row[0] = r;
            rec.row_slot(0, r, &row);
        }
        for r in 0..nb as Rid {
            row[1] = r;
            rec.row_slot(1, na as Rid + r, &row);
        }
        rec.finish(n)?
    };
    Ok(OperatorOutput {
        relation,
        bundle: seal(data, n, true),
    })
}

/// For a value occurring `x` times in `a` and `y` times in `b`, emits `x * y`
/// rows, pairing the occurrences in a-major order.
pub fn bag_intersect(a: &OperatorOutput, b: &OperatorOutput, capture: &CaptureSpec) -> Result<OperatorOutput> {
    let Setup { targets, mode } = setup(a, b, capture, [false, false])?;
    let sh = shapes(&targets, false);
    let (ra, rb) = (a.relation.clone(), b.relation.clone());
    let name = format!("intersect_all({},{})", ra.name(), rb.name());
    let mut key: Key = SmallVec::new();
    let mut table = KeyTable::default();
    let mut a_lists: Vec<Vec<Rid>> = Vec::new();
    let mut na: Vec<u32> = Vec::new();
    let keep = mode == CaptureMode::Inject || mode == CaptureMode::Callback;
    for r in 0..ra.row_count() as Rid {
        row_key(&ra, r, &mut key);
        let (e, new) = table.find_or_insert(&key);
        if new {
            na.push(0);
            if keep {
                a_lists.push(Vec::new());
            }
        }
        na[e as usize] += 1;
        if keep {
            a_lists[e as usize].push(r);
        }
    }
    let mut nb: Vec<u32> = vec![0; table.len()];
    let mut b_lists: Vec<Vec<Rid>> = if keep { vec![Vec::new(); table.len()] } else { Vec::new() };
    for r in 0..rb.row_count() as Rid {
        row_key(&rb, r, &mut key);
        if let Some(e) = table.find(&key) {
            nb[e as usize] += 1;
            if keep {
                b_lists[e as usize].push(r);
            }
        }
    }
    let mut base: Vec<u32> = Vec::with_capacity(table.len());
    let mut n = 0u32;
    for e in 0..table.len() {
        base.push(n);
        n += na[e] * nb[e];
    }
    let n = n as usize;
    let rows = (0..table.len()).flat_map(|e| std::iter::repeat_n(&table.keys()[e], (na[e] * nb[e]) as usize));
    let relation = relation_from_keys(name, &ra, rows)?;

    let bundle = match mode {
        CaptureMode::None => None,
        CaptureMode::Defer => {
            let counts: Vec<Vec<u32>> = vec![Vec::new(); targets.len()];
            let f = move || {
                let mut c = Collector::new(targets, &sh, n, &counts);
                let mut key: Key = SmallVec::new();
                let mut row = [0 as Rid; 2];
                let mut seen = vec![0u32; table.len()];
                for r in 0..ra.row_count() as Rid {
                    row_key(&ra, r, &mut key);
                    let e = table.find(&key).expect("key seen in the first pass") as usize;
                    let ia = seen[e];
                    seen[e] += 1;
                    row[0] = r;
                    for jb in 0..nb[e] {
                        c.row_slot(0, base[e] + ia * nb[e] + jb, &row);
                    }
                }
                seen.iter_mut().for_each(|s| *s = 0);
                for r in 0..rb.row_count() as Rid {
                    row_key(&rb, r, &mut key);
                    let Some(e) = table.find(&key) else { continue };
                    let e = e as usize;
                    let jb = seen[e];
                    seen[e] += 1;
                    row[1] = r;
                    for ia in 0..na[e] {
                        c.row_slot(1, base[e] + ia * nb[e] + jb, &row);
                    }
                }
                c.finish()
            };
            Some(Arc::new(LineageBundle::pending(n, f)))
        }
        _ => {
            let mut rec = Recorder::new(mode, targets, sh, Some(n), n);
            let mut row = [0 as Rid; 2];
            let mut o: Rid = 0;
            for e in 0..table.len() {
                for &x in &a_lists[e] {
                    for &y in &b_lists[e] {
                        row[0] = x;
                        row[1] = y;
                        rec.row(o, &row);
                        o += 1;
                    }
                }
            }
            seal(rec.finish(n)?, n, true)
        }
    };
    Ok(OperatorOutput { relation, bundle })
}

/// Rows of `a`, each value losing its first `y` occurrences when it occurs
/// `y` times in `b`. Every output row depends on all of `b`.
pub fn bag_diff(a: &OperatorOutput, b: &OperatorOutput, capture: &CaptureSpec) -> Result<OperatorOutput> {
    let Setup { targets, mode } = setup(a, b, capture, [true, true])?;
    let (a_targets, b_targets): (Vec<Target>, Vec<Target>) =
        targets.into_iter().partition(|t| t.tracer.slot == 0);
    let mode = if mode == CaptureMode::Defer { CaptureMode::Inject } else { mode };
    let (ra, rb) = (a.relation.clone(), b.relation.clone());
    let mut key: Key = SmallVec::new();
    let mut bt = KeyTable::default();
    let mut skip: Vec<u32> = Vec::new();
    for r in 0..rb.row_count() as Rid {
        row_key(&rb, r, &mut key);
        let (e, new) = bt.find_or_insert(&key);
        if new {
            skip.push(0);
        }
        skip[e as usize] += 1;
    }
    let captured = mode != CaptureMode::None;
    let sh = shapes(&a_targets, false);
    let mut rec = Recorder::new(mode, a_targets, sh, None, ra.row_count());
    let mut kept: Vec<Rid> = Vec::new();
    let mut row = [0 as Rid; 2];
    for r in 0..ra.row_count() as Rid {
        row_key(&ra, r, &mut key);
        if let Some(e) = bt.find(&key) {
            if skip[e as usize] > 0 {
                skip[e as usize] -= 1;
                continue;
            }
        }
        if captured {
            row[0] = r;
            rec.row_slot(0, kept.len() as Rid, &row);
        }
        kept.push(r);
    }
    let n = kept.len();
    let relation = Arc::new(ra.take(&kept).renamed(format!("except_all({},{})", ra.name(), rb.name())));
    let bundle = if captured {
        let mut data = rec.finish(n)?;
        add_whole(&mut data, &b_targets, n);
        seal(data, n, true)
    } else {
        None
    };
    Ok(OperatorOutput { relation, bundle })
}
