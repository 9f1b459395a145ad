//! Acceptance gate: one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smoke_core::bench::micro::{bench_micro, Micro, MicroKind, MicroParams, Variant};
use smoke_core::bench::xfilter::FLIGHT_DIMS;
use smoke_core::bench::{Sample, Timing};
use smoke_core::fd::{profile, Approach, Fd, FdViolationGraph};
use smoke_core::lineage::{Rid, RidArray};
use smoke_core::lineage_query::{ExecOptions, Session};
use smoke_core::operators::{CaptureMode, CaptureSpec};
use smoke_core::relstore::{gen_flights, gen_zipf, Catalog, DataType, KeyMetadata, Relation, RelationBuilder, Schema, Value};
use smoke_core::tpch::{self, drill, replay_check, same_groups, Query, SHIPINSTRUCTS, SHIPMODES};
use smoke_core::workload::WorkloadSpec;
use smoke_core::xfilter::{Crossfilter, Strategy};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e(err: smoke_core::Error) -> String {
    err.to_string()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn oracle_equivalence() -> Outcome {
    let t = Instant::now();
    for op in common::OPS {
        for seed in 0..1000 {
            let inst = common::instance(op, seed, 64);
            common::check(op, &inst, CaptureMode::Inject).map_err(|m| format!("{op:?} seed {seed}: {m}"))?;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{} operators x 1000 instances in {secs:.1} s", common::OPS.len()))
}

fn mode_equivalence() -> Outcome {
    for op in common::OPS {
        for seed in 0..1000 {
            let inst = common::instance(op, seed, 64);
            let inject = common::fingerprint(&common::run(op, &inst, CaptureMode::Inject).map_err(e)?);
            for mode in [CaptureMode::Defer, CaptureMode::Callback] {
                let other = common::fingerprint(&common::run(op, &inst, mode).map_err(e)?);
                ensure(other == inject, || format!("{op:?} seed {seed}: {mode} differs"))?;
            }
        }
    }
    Ok("defer and callback bundles equal inject on 13000 instances".into())
}

fn lazy_eager() -> Outcome {
    let t = Instant::now();
    let mut c = Catalog::new();
    c.add(gen_zipf(1_000_000, 5000, 1.0, 42));
    let mut s = Session::new(c);
    let r = s
        .execute_with("SELECT z, count(*) FROM zipf GROUP BY z", &ExecOptions::mode(CaptureMode::Inject))
        .map_err(e)?;
    ensure(r.row_count() == 5000, || format!("{} groups", r.row_count()))?;
    for o in 0..r.row_count() as Rid {
        let eager = s.backward(&r.handle, &[o], "zipf").map_err(e)?;
        let lazy = s.lazy_backward(&r.handle, &[o], "zipf").map_err(e)?;
        ensure(eager == lazy, || format!("group {o} differs"))?;
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 300.0, || format!("took {secs:.1} s"))?;
    Ok(format!("5000 groups in {secs:.1} s"))
}

fn tpch_replay(catalog: &Catalog) -> Outcome {
    let mut rows = Vec::new();
    for q in Query::ALL {
        let out = replay_check(catalog.clone(), q, 1e-9).map_err(e)?;
        if let Some((o, m)) = out.mismatches.first() {
            return Err(format!("{} row {o}: {m}", q.name()));
        }
        ensure(out.rows > 0, || format!("{} is empty", q.name()))?;
        rows.push(format!("{} {}", q.name(), out.rows));
    }
    Ok(format!("rows replayed: {}", rows.join(", ")))
}

fn overheads() -> Outcome {
    let report = bench_micro(
        MicroKind::GroupBy,
        MicroParams::default(),
        &[CaptureMode::Inject, CaptureMode::Callback],
        Timing { warmups: 1, runs: 5 },
    )
    .map_err(e)?;
    let over = |m: &str| report.find("groupby", m).and_then(|r| r.relative_overhead).unwrap_or(f64::NAN);
    let (inject, callback) = (over("inject"), over("callback"));
    ensure(inject < 3.0, || format!("groupby inject overhead {inject:.2}"))?;
    ensure(callback > inject, || format!("callback {callback:.2} <= inject {inject:.2}"))?;

    let m = Micro::new(MicroKind::PkFk, MicroParams::default()).map_err(e)?;
    let none = CaptureSpec::none();
    let plain = m.capture(Variant { mode: CaptureMode::Inject, exact: false }).map_err(e)?;
    let exact = m.capture(Variant { mode: CaptureMode::Inject, exact: true }).map_err(e)?;
    let specs = [&none, &plain, &exact];
    let mut best = [f64::INFINITY; 3];
    for round in 0..24 {
        for k in 0..3 {
            let i = (k + round) % 3;
            let sample = m.sample(specs[i]).map_err(e)?;
            if i == 2 {
                ensure(sample.growth_events == 0, || format!("exact cardinalities grew {} times", sample.growth_events))?;
            }
            best[i] = best[i].min(sample.total_ms());
        }
    }
    let (op, ox) = ((best[1] - best[0]) / best[0], (best[2] - best[0]) / best[0]);
    ensure(ox < op, || format!("pkfk exact {ox:.3} >= plain {op:.3}"))?;
    Ok(format!(
        "groupby inject {inject:.2}, callback {callback:.2}; pkfk plain {op:.3}, exact {ox:.3} with 0 growth"
    ))
}

fn defer_mn() -> Outcome {
    let params = MicroParams {
        n: 10_000,
        ..MicroParams::default()
    };
    let m = Micro::new(MicroKind::Mn, params).map_err(e)?;
    let (inject, defer) = (CaptureSpec::new(CaptureMode::Inject), CaptureSpec::new(CaptureMode::Defer));
    let (mut ti, mut td) = (Vec::new(), Vec::new());
    let mut growth = 0;
    for i in 0..12 {
        let a: Sample = m.sample(&inject).map_err(e)?;
        let d: Sample = m.sample(&defer).map_err(e)?;
        growth = growth.max(d.growth_detail.get("zipf1.forward").copied().unwrap_or(u64::MAX));
        if i > 0 {
            ti.push(a.total_ms());
            td.push(d.total_ms());
        }
    }
    ensure(growth == 0, || format!("forward growth events {growth}"))?;
    let (mi, md) = (median(ti), median(td));
    ensure(md <= mi, || format!("defer {md:.2} ms > inject {mi:.2} ms"))?;
    Ok(format!("forward growth 0; defer {md:.2} ms <= inject {mi:.2} ms"))
}

fn text(v: &Value) -> String {
    match v {
        Value::Text(s) => s.to_string(),
        other => other.to_string(),
    }
}

fn workload(catalog: &Catalog) -> Outcome {
    let mut s = Session::new(catalog.clone());
    let full = s
        .execute_with(Query::Q3.sql(), &ExecOptions::mode(CaptureMode::Inject).with_handle("full"))
        .map_err(e)?;
    let pruned = s
        .execute_with(
            Query::Q3.sql(),
            &ExecOptions::mode(CaptureMode::Inject)
                .with_workload(WorkloadSpec::backward("lineitem"))
                .with_handle("pruned"),
        )
        .map_err(e)?;
    let (a, b) = (full.backward_map("lineitem").map_err(e)?, pruned.backward_map("lineitem").map_err(e)?);
    ensure(a.kind() == b.kind() && a.bytes() == b.bytes() && a.dump() == b.dump(), || {
        "surviving index differs".into()
    })?;
    ensure(pruned.forward_map("lineitem").is_err(), || "forward index survived".into())?;
    ensure(pruned.index_bytes() < full.index_bytes(), || "index bytes not reduced".into())?;
    let pruning = format!("index bytes {} -> {}", full.index_bytes(), pruned.index_bytes());

    let plain = ExecOptions::mode(CaptureMode::Inject).with_handle("q1");
    let q1 = s.execute_with(tpch::Q1, &plain).map_err(e)?;
    let skip = ExecOptions::mode(CaptureMode::Inject)
        .with_workload(drill::skipping_workload())
        .with_handle("q1p");
    s.execute_with(tpch::Q1, &skip).map_err(e)?;
    let groups: Vec<Vec<Value>> = q1.relation().rows().collect();
    let mut checked = 0;
    for (o, g) in groups.iter().enumerate() {
        let (flag, status) = (text(&g[0]), text(&g[1]));
        for mode in SHIPMODES {
            for instr in SHIPINSTRUCTS {
                let fast = s.execute(&drill::q1b("q1p", o as Rid, mode, instr)).map_err(e)?;
                ensure(fast.stats.data_skipping, || "data skipping not used".into())?;
                let slow = s.execute(&drill::q1b("q1", o as Rid, mode, instr)).map_err(e)?;
                let lazy = s.execute(&drill::q1b_lazy(&flag, &status, mode, instr)).map_err(e)?;
                ensure(same_groups(fast.relation(), slow.relation(), 2, 1e-9), || {
                    format!("Q1_b {o} {mode}/{instr}: skipping != index scan")
                })?;
                ensure(same_groups(fast.relation(), lazy.relation(), 2, 1e-9), || {
                    format!("Q1_b {o} {mode}/{instr}: skipping != lazy")
                })?;
                checked += 1;
            }
        }
    }

    let cube = ExecOptions::mode(CaptureMode::Inject).with_workload(drill::pushdown_workload());
    let mut cells = 0;
    for (o, g) in groups.iter().enumerate() {
        let (flag, status) = (text(&g[0]), text(&g[1]));
        let h = format!("q1b_{o}");
        let b = s
            .execute_with(&drill::q1b("q1", o as Rid, "MAIL", "NONE"), &cube.clone().with_handle(h.clone()))
            .map_err(e)?;
        for ob in 0..b.row_count() as Rid {
            let row = b.relation().row(ob);
            let (Value::Int(y), Value::Int(mo)) = (&row[0], &row[1]) else {
                return Err(format!("unexpected Q1_b row {row:?}"));
            };
            let before = s.scan_count();
            let c = s.execute(&drill::q1c(&h, ob)).map_err(e)?;
            ensure(c.stats.cube_fetch, || "cube not used".into())?;
            ensure(c.stats.base_scans == 0 && s.scan_count() == before, || "fetch scanned a base table".into())?;
            let lazy = s
                .execute(&drill::q1c_lazy(&flag, &status, "MAIL", "NONE", *y, *mo))
                .map_err(e)?;
            ensure(same_groups(c.relation(), lazy.relation(), 3, 1e-9), || {
                format!("Q1_c {o}/{ob} differs from lazy")
            })?;
            cells += 1;
        }
    }
    Ok(format!("{pruning}; {checked} Q1_b answers; {cells} Q1_c fetches with 0 scans"))
}

fn crossfilter() -> Outcome {
    let flights = Arc::new(gen_flights(1_000_000, 42));
    let strategies = [Strategy::Lazy, Strategy::Bt, Strategy::BtFt];
    let xs: Vec<Crossfilter> = strategies
        .iter()
        .map(|&s| Crossfilter::new(flights.clone(), &FLIGHT_DIMS, s))
        .collect::<smoke_core::Result<_>>()
        .map_err(e)?;
    let mut lat: Vec<Vec<f64>> = vec![Vec::new(); xs.len()];
    let mut bins = 0;
    for (v, view) in xs[0].views().iter().enumerate() {
        for b in 0..view.keys.len() {
            let mut answers = Vec::with_capacity(xs.len());
            for (i, x) in xs.iter().enumerate() {
                let t = Instant::now();
                answers.push(x.brush(v, &[b]).map_err(e)?);
                lat[i].push(ms(t));
            }
            ensure(answers.iter().all(|a| *a == answers[0]), || format!("view {v} bin {b} differs"))?;
            bins += 1;
        }
    }
    let med: Vec<f64> = lat.iter().map(|l| median(l.clone())).collect();
    let cum: Vec<f64> = lat.iter().map(|l| l.iter().sum()).collect();
    let (lazy, btft) = (0, 2);
    ensure(med[btft] < 150.0 && med[btft] < med[lazy], || {
        format!("BT_FT median {:.3} ms, Lazy {:.3} ms", med[btft], med[lazy])
    })?;
    ensure(cum[btft] < cum[lazy], || format!("cumulative BT_FT {:.0} ms >= Lazy {:.0} ms", cum[btft], cum[lazy]))?;
    Ok(format!(
        "{bins} bins agree; median BT_FT {:.3} ms, Lazy {:.3} ms; cumulative {:.0} ms vs {:.0} ms",
        med[btft], med[lazy], cum[btft], cum[lazy]
    ))
}

fn int_table(cols: &[&str], rows: &[Vec<i64>]) -> Arc<Relation> {
    let fields: Vec<(&str, DataType)> = cols.iter().map(|c| (*c, DataType::Int64)).collect();
    let mut b = RelationBuilder::new("t", Schema::of(&fields).unwrap());
    for r in rows {
        b.push_row(r.iter().map(|&v| Value::Int(v)).collect()).unwrap();
    }
    Arc::new(b.finish().unwrap())
}

/// Direct grouping: lhs values with more than one rhs value, and their rids.
fn fd_oracle(cols: &[&str], rows: &[Vec<i64>], fd: &Fd) -> BTreeMap<String, Vec<Rid>> {
    let at = |a: &str| cols.iter().position(|c| *c == a).unwrap();
    let lhs: Vec<usize> = fd.lhs.iter().map(|a| at(a)).collect();
    let rhs = at(&fd.rhs);
    let mut groups: BTreeMap<String, (std::collections::BTreeSet<i64>, Vec<Rid>)> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let key = lhs.iter().map(|&c| r[c].to_string()).collect::<Vec<_>>().join(",");
        let g = groups.entry(key).or_default();
        g.0.insert(r[rhs]);
        g.1.push(i as Rid);
    }
    groups.into_iter().filter(|(_, (vals, _))| vals.len() > 1).map(|(k, (_, rids))| (k, rids)).collect()
}

fn agree(cols: &[&str], rows: &[Vec<i64>], fds: &[Fd]) -> Result<(), String> {
    let t = int_table(cols, rows);
    let (cd, _): (FdViolationGraph, _) = profile(t.clone(), fds, Approach::Cd).map_err(e)?;
    let (ug, _) = profile(t, fds, Approach::Ug).map_err(e)?;
    ensure(cd == ug, || "CD and UG graphs differ".into())?;
    for fd in fds {
        let want = fd_oracle(cols, rows, fd);
        let got = cd.edges.get(fd).cloned().unwrap_or_default();
        ensure(got == want, || format!("{fd}: {got:?} != {want:?}"))?;
    }
    Ok(())
}

fn fd_profiling() -> Outcome {
    let cols = ["x", "y", "w"];
    let fds = [
        Fd::new(&["x"], "y"),
        Fd::new(&["x", "w"], "y"),
        Fd::new(&["y"], "w"),
        Fd::new(&["w"], "x"),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..100 {
        let n = rng.random_range(0..300);
        let dom: Vec<i64> = (0..3).map(|_| rng.random_range(1..12)).collect();
        let rows: Vec<Vec<i64>> = (0..n).map(|_| dom.iter().map(|&d| rng.random_range(0..d)).collect()).collect();
        agree(&cols, &rows, &fds).map_err(|m| format!("table {i}: {m}"))?;
    }

    let zs = ["zip", "state"];
    let fixture: Vec<Vec<i64>> = [[10001, 1], [10001, 1], [10002, 1], [10002, 2], [60601, 3], [60601, 4], [60601, 3]]
        .iter()
        .map(|r| r.to_vec())
        .collect();
    let zip_state = Fd::new(&["zip"], "state");
    agree(&zs, &fixture, &[zip_state.clone()]).map_err(|m| format!("fixture: {m}"))?;
    let (g, _) = profile(int_table(&zs, &fixture), &[zip_state.clone()], Approach::Ug).map_err(e)?;
    let want: BTreeMap<String, Vec<Rid>> = [("10002".to_string(), vec![2, 3]), ("60601".to_string(), vec![4, 5, 6])].into();
    ensure(g.edges.get(&zip_state) == Some(&want), || format!("fixture graph {:?}", g.edges))?;

    let p = provenance_example()?;
    Ok(format!("100 tables and fixture agree; {p}"))
}

fn provenance_example() -> Outcome {
    let table = |name: &str, cols: &[(&str, DataType)], rows: Vec<Vec<Value>>| {
        let mut b = RelationBuilder::new(name, Schema::of(cols).unwrap());
        for r in rows {
            b.push_row(r).unwrap();
        }
        b.finish().unwrap()
    };
    let mut c = Catalog::new();
    c.add(table(
        "A",
        &[("cid", DataType::Int64), ("cname", DataType::Text)],
        vec![vec![Value::Int(1), Value::text("Bob")], vec![Value::Int(2), Value::text("Alice")]],
    ));
    c.add(table(
        "B",
        &[("oid", DataType::Int64), ("cid", DataType::Int64), ("pname", DataType::Text)],
        vec![
            vec![Value::Int(1), Value::Int(1), Value::text("iPhone")],
            vec![Value::Int(2), Value::Int(1), Value::text("iPhone")],
            vec![Value::Int(3), Value::Int(2), Value::text("XBox")],
        ],
    ));
    c.set_keys(KeyMetadata::from_json(r#"{"primary_keys": {"A": ["cid"], "B": ["oid"]}}"#).map_err(e)?);
    let mut s = Session::new(c);
    let r = s
        .execute("SELECT count(*), A.cname, B.pname FROM A, B WHERE A.cid = B.cid GROUP BY A.cname, B.pname")
        .map_err(e)?;
    let o1 = (0..r.row_count() as Rid)
        .find(|&o| r.relation().row(o)[1] == Value::text("Bob"))
        .ok_or("no output for Bob")?;
    let p = s.derive_provenance(&r.handle, o1).map_err(e)?;
    let t = |n: &str, r: Rid| (n.to_string(), r);
    ensure(p.which == vec![t("A", 0), t("B", 0), t("B", 1)], || format!("which {:?}", p.which))?;
    ensure(p.why == vec![vec![t("A", 0), t("B", 0)], vec![t("A", 0), t("B", 1)]], || {
        format!("why {:?}", p.why)
    })?;
    Ok("which(o1)={a1,b1,b2}, why(o1)={(a1,b1),(a1,b2)}".into())
}

fn growth_policy() -> Outcome {
    let mut a = RidArray::new();
    let mut trace = Vec::new();
    for i in 0..10_000u32 {
        a.push(i);
        if trace.last() != Some(&a.capacity()) {
            trace.push(a.capacity());
        }
    }
    let mut want = vec![10usize];
    while *want.last().unwrap() < 10_000 {
        let c = *want.last().unwrap();
        want.push(c * 3 / 2);
    }
    ensure(trace == want, || format!("trace {trace:?}"))?;
    ensure(trace[..4] == [10, 15, 22, 33], || format!("prefix {:?}", &trace[..4]))?;
    Ok(format!("{} capacities: 10,15,22,33,...,{}", trace.len(), trace.last().unwrap()))
}

fn main() {
    let mut failed = 0;
    let mut gate = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(d) => println!("PASS [{id}] {name}: {d} ({secs:.1} s)"),
            Err(d) => {
                failed += 1;
                println!("FAIL [{id}] {name}: {d} ({secs:.1} s)");
            }
        }
    };
    let catalog = tpch::generate_catalog(0.01);
    gate(1, "oracle equivalence", &mut oracle_equivalence);
    gate(2, "mode equivalence", &mut mode_equivalence);
    gate(3, "lazy/eager equivalence", &mut lazy_eager);
    gate(4, "tpch replay", &mut || tpch_replay(catalog.as_ref().map_err(|err| err.to_string())?));
    gate(5, "overhead bounds", &mut overheads);
    gate(6, "defer m:n join", &mut defer_mn);
    gate(7, "workload optimizations", &mut || workload(catalog.as_ref().map_err(|err| err.to_string())?));
    gate(8, "crossfilter", &mut crossfilter);
    gate(9, "fd profiling", &mut fd_profiling);
    gate(10, "growth policy", &mut growth_policy);
    println!("{} of 10 criteria passed", 10 - failed);
}
