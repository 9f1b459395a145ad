//! Nested-loop reference semantics for every physical operator, and a
//! canonical form for comparing lineage bundles against them.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smoke_core::expr::{BinOp, Expr};
use smoke_core::operators::{
    bag_diff, bag_intersect, bag_union, cross_product, groupby, hashjoin, nlj, project, select, set_diff,
    set_intersect, set_union, CaptureMode, CaptureSpec, JoinOptions, OperatorOutput,
};
use smoke_core::planner::bind_aggregate;
use smoke_core::relstore::{DataType, Relation, RelationBuilder, Schema, Value};

pub type Rid = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Select,
    Project,
    GroupBy,
    HashJoin,
    PkFkJoin,
    Nlj,
    Cross,
    SetUnion,
    SetIntersect,
    SetDiff,
    BagUnion,
    BagIntersect,
    BagDiff,
}

pub const OPS: [Op; 13] = [
    Op::Select,
    Op::Project,
    Op::GroupBy,
    Op::HashJoin,
    Op::PkFkJoin,
    Op::Nlj,
    Op::Cross,
    Op::SetUnion,
    Op::SetIntersect,
    Op::SetDiff,
    Op::BagUnion,
    Op::BagIntersect,
    Op::BagDiff,
];

impl Op {
    pub fn binary(self) -> bool {
        !matches!(self, Op::Select | Op::Project | Op::GroupBy)
    }
}

/// Two random inputs `A(k, v)` and `B(k, v)` of at most `max_rows` rows.
/// For pk-fk joins the keys of `A` are distinct.
pub struct Instance {
    pub a: Arc<Relation>,
    pub b: Arc<Relation>,
}

fn rel(name: &str, rows: &[(i64, i64)]) -> Arc<Relation> {
    let schema = Schema::of(&[("k", DataType::Int64), ("v", DataType::Int64)]).unwrap();
    let mut rb = RelationBuilder::new(name, schema);
    for &(k, v) in rows {
        rb.push_row(vec![Value::Int(k), Value::Int(v)]).unwrap();
    }
    Arc::new(rb.finish().unwrap())
}

pub fn instance(op: Op, seed: u64, max_rows: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let na = rng.random_range(0..=max_rows);
    let nb = rng.random_range(0..=max_rows);
    // Small domains so that duplicates and matches are common.
    let kd = rng.random_range(1..=8);
    let vd = rng.random_range(1..=4);
    let mut a: Vec<(i64, i64)> = (0..na)
        .map(|_| (rng.random_range(0..kd), rng.random_range(0..vd)))
        .collect();
    if op == Op::PkFkJoin {
        let mut keys: Vec<i64> = (0..na as i64).collect();
        for i in (1..keys.len()).rev() {
            keys.swap(i, rng.random_range(0..=i));
        }
        for (row, k) in a.iter_mut().zip(keys) {
            row.0 = k;
        }
    }
    let bk = if op == Op::PkFkJoin { na.max(1) as i64 + 2 } else { kd };
    let b: Vec<(i64, i64)> = (0..nb)
        .map(|_| (rng.random_range(0..bk), rng.random_range(0..vd)))
        .collect();
    Instance {
        a: rel("A", &a),
        b: rel("B", &b),
    }
}

pub fn run(op: Op, inst: &Instance, mode: CaptureMode) -> smoke_core::Result<OperatorOutput> {
    let a = OperatorOutput::scan(inst.a.clone());
    let b = OperatorOutput::scan(inst.b.clone());
    let c = CaptureSpec::new(mode);
    match op {
        Op::Select => {
            let pred = Expr::binary(BinOp::Lt, Expr::col(0, 1, "v"), Expr::lit(Value::Int(2)));
            select(&a, &pred, &c, None)
        }
        Op::Project => {
            let sel = select(&a, &Expr::binary(BinOp::Ge, Expr::col(0, 0, "k"), Expr::lit(Value::Int(1))), &c, None)?;
            project(
                &sel,
                &[("w".into(), Expr::binary(BinOp::Add, Expr::col(0, 1, "v"), Expr::col(0, 0, "k")))],
            )
        }
        Op::GroupBy => {
            let aggs = ["count(*)", "sum(v)", "min(v)", "max(v)"]
                .iter()
                .map(|t| bind_aggregate(t, &inst.a))
                .collect::<smoke_core::Result<Vec<_>>>()?;
            groupby(&a, &[0], aggs, &c)
        }
        Op::HashJoin => hashjoin(&a, &b, &[0], &[0], JoinOptions { pkfk: false }, &c),
        Op::PkFkJoin => hashjoin(&a, &b, &[0], &[0], JoinOptions { pkfk: true }, &c),
        Op::Nlj => nlj(&a, &b, &Expr::binary(BinOp::Lt, Expr::col(0, 1, "v"), Expr::col(1, 1, "v")), &c),
        Op::Cross => cross_product(&a, &b, &c),
        Op::SetUnion => set_union(&a, &b, &c),
        Op::SetIntersect => set_intersect(&a, &b, &c),
        Op::SetDiff => set_diff(&a, &b, &c),
        Op::BagUnion => bag_union(&a, &b, &c),
        Op::BagIntersect => bag_intersect(&a, &b, &c),
        Op::BagDiff => bag_diff(&a, &b, &c),
    }
}

/// Output row as displayed values, and backward rids per base relation.
pub type Entry = (Vec<String>, Vec<Vec<Rid>>);

fn int(r: &Relation, c: usize, i: usize) -> i64 {
    match r.value(c, i as Rid) {
        Value::Int(x) => x,
        other => panic!("expected int, got {other:?}"),
    }
}

fn row(r: &Relation, i: usize) -> (i64, i64) {
    (int(r, 0, i), int(r, 1, i))
}

fn show(vals: &[i64]) -> Vec<String> {
    vals.iter().map(|v| Value::Int(*v).to_string()).collect()
}

fn rows_of(r: &Relation) -> Vec<(i64, i64)> {
    (0..r.row_count()).map(|i| row(r, i)).collect()
}

fn all(n: usize) -> Vec<Rid> {
    (0..n as Rid).collect()
}

/// Reference output, one entry per output row, by exhaustive enumeration.
pub fn oracle(op: Op, inst: &Instance) -> Vec<Entry> {
    let (a, b) = (rows_of(&inst.a), rows_of(&inst.b));
    let mut out: Vec<Entry> = Vec::new();
    let pair = |x: (i64, i64), y: (i64, i64)| show(&[x.0, x.1, y.0, y.1]);
    match op {
        Op::Select => {
            for (i, &(k, v)) in a.iter().enumerate() {
                if v < 2 {
                    out.push((show(&[k, v]), vec![vec![i as Rid]]));
                }
            }
        }
        Op::Project => {
            for (i, &(k, v)) in a.iter().enumerate() {
                if k >= 1 {
                    out.push((show(&[v + k]), vec![vec![i as Rid]]));
                }
            }
        }
        Op::GroupBy => {
            let mut seen: Vec<i64> = Vec::new();
            for &(k, _) in &a {
                if !seen.contains(&k) {
                    seen.push(k);
                }
            }
            for k in seen {
                let rids: Vec<Rid> = (0..a.len()).filter(|&i| a[i].0 == k).map(|i| i as Rid).collect();
                let vs: Vec<i64> = rids.iter().map(|&i| a[i as usize].1).collect();
                let agg = [
                    k,
                    vs.len() as i64,
                    vs.iter().sum(),
                    *vs.iter().min().unwrap(),
                    *vs.iter().max().unwrap(),
                ];
                out.push((show(&agg), vec![rids]));
            }
        }
        Op::HashJoin | Op::PkFkJoin => {
            for (j, &y) in b.iter().enumerate() {
                for (i, &x) in a.iter().enumerate() {
                    if x.0 == y.0 {
                        out.push((pair(x, y), vec![vec![i as Rid], vec![j as Rid]]));
                    }
                }
            }
        }
        Op::Nlj | Op::Cross => {
            for (i, &x) in a.iter().enumerate() {
                for (j, &y) in b.iter().enumerate() {
                    if op == Op::Cross || x.1 < y.1 {
                        out.push((pair(x, y), vec![vec![i as Rid], vec![j as Rid]]));
                    }
                }
            }
        }
        Op::SetUnion | Op::SetIntersect | Op::SetDiff => {
            let mut distinct: Vec<(i64, i64)> = Vec::new();
            let candidates: Vec<(i64, i64)> = if op == Op::SetUnion {
                a.iter().chain(&b).copied().collect()
            } else {
                a.clone()
            };
            for x in candidates {
                if !distinct.contains(&x) {
                    distinct.push(x);
                }
            }
            for x in distinct {
                let in_b = b.contains(&x);
                let keep = match op {
                    Op::SetUnion => true,
                    Op::SetIntersect => in_b,
                    _ => !in_b,
                };
                if !keep {
                    continue;
                }
                let ra: Vec<Rid> = (0..a.len()).filter(|&i| a[i] == x).map(|i| i as Rid).collect();
                let rb: Vec<Rid> = match op {
                    Op::SetDiff => all(b.len()),
                    _ => (0..b.len()).filter(|&j| b[j] == x).map(|j| j as Rid).collect(),
                };
                out.push((show(&[x.0, x.1]), vec![ra, rb]));
            }
        }
        Op::BagUnion => {
            for (i, &x) in a.iter().enumerate() {
                out.push((show(&[x.0, x.1]), vec![vec![i as Rid], vec![]]));
            }
            for (j, &y) in b.iter().enumerate() {
                out.push((show(&[y.0, y.1]), vec![vec![], vec![j as Rid]]));
            }
        }
        Op::BagIntersect => {
            for (i, &x) in a.iter().enumerate() {
                for (j, &y) in b.iter().enumerate() {
                    if x == y {
                        out.push((show(&[x.0, x.1]), vec![vec![i as Rid], vec![j as Rid]]));
                    }
                }
            }
        }
        Op::BagDiff => {
            let mut cancel: BTreeMap<(i64, i64), usize> = BTreeMap::new();
            for &y in &b {
                *cancel.entry(y).or_default() += 1;
            }
            for (i, &x) in a.iter().enumerate() {
                match cancel.get_mut(&x) {
                    Some(c) if *c > 0 => *c -= 1,
                    _ => out.push((show(&[x.0, x.1]), vec![vec![i as Rid], all(b.len())])),
                }
            }
        }
    }
    out
}

pub fn bases(op: Op) -> &'static [&'static str] {
    if op.binary() {
        &["A", "B"]
    } else {
        &["A"]
    }
}

/// Entries read from an operator output's relation and backward lineage.
pub fn observed(op: Op, out: &OperatorOutput) -> Result<Vec<Entry>, String> {
    let rel = &out.relation;
    let bundle = out.bundle.as_ref().ok_or("no lineage bundle")?;
    bundle.finalize();
    let mut entries = Vec::with_capacity(rel.row_count());
    for o in 0..rel.row_count() as Rid {
        let vals: Vec<String> = rel.row(o).iter().map(|v| v.to_string()).collect();
        let mut per = Vec::new();
        for base in bases(op) {
            let mut rids = match out.backward(base) {
                Some(m) => m.targets(o),
                None if op.binary() => Vec::new(),
                None => return Err(format!("no backward index for {base}")),
            };
            rids.sort_unstable();
            per.push(rids);
        }
        entries.push((vals, per));
    }
    Ok(entries)
}

/// Checks that each forward index is exactly the inverse of its backward index.
pub fn check_forward(op: Op, inst: &Instance, out: &OperatorOutput) -> Result<(), String> {
    for (base, len) in bases(op).iter().zip([inst.a.row_count(), inst.b.row_count()]) {
        let (Some(bw), Some(fw)) = (out.backward(base), out.forward(base)) else {
            if out.backward(base).is_none() && out.forward(base).is_none() {
                continue;
            }
            return Err(format!("{base}: only one direction captured"));
        };
        let mut inverse: Vec<Vec<Rid>> = vec![Vec::new(); len];
        for o in 0..out.relation.row_count() as Rid {
            for r in bw.targets(o) {
                inverse[r as usize].push(o);
            }
        }
        for (r, want) in inverse.iter_mut().enumerate() {
            want.sort_unstable();
            let mut got = if r < fw.len() { fw.targets(r as Rid) } else { Vec::new() };
            got.sort_unstable();
            if got != *want {
                return Err(format!("{base} forward[{r}] = {got:?}, inverse of backward = {want:?}"));
            }
        }
    }
    Ok(())
}

fn sorted(mut v: Vec<Entry>) -> Vec<Entry> {
    v.sort();
    v
}

/// Compares an operator run against the oracle: same multiset of (row,
/// backward) entries, and forward indexes inverse to backward.
pub fn check(op: Op, inst: &Instance, mode: CaptureMode) -> Result<(), String> {
    let out = run(op, inst, mode).map_err(|e| e.to_string())?;
    let got = sorted(observed(op, &out)?);
    let want = sorted(oracle(op, inst));
    if got != want {
        return Err(format!(
            "{op:?}/{mode}: A={:?} B={:?}\n got {got:?}\nwant {want:?}",
            rows_of(&inst.a),
            rows_of(&inst.b)
        ));
    }
    check_forward(op, inst, &out).map_err(|e| format!("{op:?}/{mode}: {e}"))
}

/// Output rows plus a full dump of the lineage bundle.
pub fn fingerprint(out: &OperatorOutput) -> (Vec<Vec<String>>, String) {
    let rows = out
        .relation
        .rows()
        .map(|r| r.iter().map(|v| format!("{v:?}")).collect())
        .collect();
    let dump = out.bundle.as_ref().map(|b| b.dump_json().to_string()).unwrap_or_default();
    (rows, dump)
}
