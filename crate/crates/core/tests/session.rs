use smoke_core::lineage_query::{ExecOptions, Session};
use smoke_core::operators::CaptureMode;
use smoke_core::relstore::{gen_zipf, Catalog, DataType, KeyMetadata, Relation, RelationBuilder, Schema, Value};
use smoke_core::workload::WorkloadSpec;
use smoke_core::Error;

fn table(name: &str, cols: &[(&str, DataType)], rows: Vec<Vec<Value>>) -> Relation {
    let mut b = RelationBuilder::new(name, Schema::of(cols).unwrap());
    for r in rows {
        b.push_row(r).unwrap();
    }
    b.finish().unwrap()
}

fn customers_orders() -> Session {
    let a = table(
        "A",
        &[("cid", DataType::Int64), ("cname", DataType::Text)],
        vec![
            vec![Value::Int(1), Value::text("Bob")],
            vec![Value::Int(2), Value::text("Alice")],
        ],
    );
    let b = table(
        "B",
        &[
            ("oid", DataType::Int64),
            ("cid", DataType::Int64),
            ("pname", DataType::Text),
        ],
        vec![
            vec![Value::Int(1), Value::Int(1), Value::text("iPhone")],
            vec![Value::Int(2), Value::Int(1), Value::text("iPhone")],
            vec![Value::Int(3), Value::Int(2), Value::text("XBox")],
        ],
    );
    let mut c = Catalog::new();
    c.add(a);
    c.add(b);
    c.set_keys(KeyMetadata::from_json(r#"{"primary_keys": {"A": ["cid"], "B": ["oid"]}}"#).unwrap());
    Session::new(c)
}

const COUNTS: &str = "SELECT count(*), A.cname, B.pname FROM A, B WHERE A.cid = B.cid GROUP BY A.cname, B.pname";

#[test]
fn why_and_which_provenance() {
    let mut s = customers_orders();
    let r = s.execute(COUNTS).unwrap();
    assert_eq!(r.row_count(), 2);
    assert_eq!(r.relation().row(0)[1], Value::text("Bob"));
    let p = s.derive_provenance(&r.handle, 0).unwrap();
    let t = |n: &str, r: u32| (n.to_string(), r);
    assert_eq!(p.which, vec![t("A", 0), t("B", 0), t("B", 1)]);
    assert_eq!(p.why, vec![vec![t("A", 0), t("B", 0)], vec![t("A", 0), t("B", 1)]]);
}

#[test]
fn backward_and_forward_round_trip() {
    let mut s = customers_orders();
    let r = s.execute(COUNTS).unwrap();
    assert_eq!(s.backward(&r.handle, &[0], "B").unwrap(), vec![0, 1]);
    assert_eq!(s.backward(&r.handle, &[1], "A").unwrap(), vec![1]);
    assert_eq!(s.forward(&r.handle, &[2], "B").unwrap(), vec![1]);
    assert_eq!(s.forward(&r.handle, &[0], "A").unwrap(), vec![0]);
    assert!(matches!(s.backward(&r.handle, &[9], "B"), Err(Error::InvalidRid { .. })));
    assert!(matches!(s.backward("nope", &[0], "B"), Err(Error::UnknownHandle(_))));
}

#[test]
fn lineage_table_functions() {
    let mut s = customers_orders();
    s.execute_with(COUNTS, &ExecOptions::mode(CaptureMode::Inject).with_handle("h"))
        .unwrap();
    let r = s.execute("SELECT oid FROM backward(h, [0], B)").unwrap();
    let oids: Vec<Value> = r.relation().rows().map(|row| row[0].clone()).collect();
    assert_eq!(oids, vec![Value::Int(1), Value::Int(2)]);
    let r = s
        .execute("SELECT count(*) FROM forward(h, backward(h, [1], A), A)")
        .unwrap();
    assert_eq!(r.relation().row(0), vec![Value::Int(1)]);
    // The consuming query traces through to the base table.
    let r = s.execute("SELECT pname, count(*) FROM backward(h, *, B) GROUP BY pname").unwrap();
    assert_eq!(s.backward(&r.handle, &[0], "B").unwrap(), vec![0, 1]);
}

#[test]
fn no_lineage_without_capture() {
    let mut s = customers_orders();
    let r = s
        .execute_with(COUNTS, &ExecOptions::mode(CaptureMode::None).with_handle("h"))
        .unwrap();
    assert!(matches!(s.backward(&r.handle, &[0], "A"), Err(Error::NoIndex { .. })));
    assert!(matches!(
        s.execute("SELECT * FROM backward(h, [0], A)"),
        Err(Error::NoIndex { .. })
    ));
}

#[test]
fn pipelines_and_materialization_points() {
    let mut s = customers_orders();
    let r = s.execute(COUNTS).unwrap();
    assert_eq!(r.stats.pipelines, 2);
    assert_eq!(r.stats.materialization_points, 1);
    let nested = "SELECT cname, count(*) FROM A WHERE cid > 0 GROUP BY cname HAVING count(*) > 0";
    let p = s.execute(nested).unwrap();
    let n = s
        .execute_with(nested, &ExecOptions::mode(CaptureMode::Inject).naive(true))
        .unwrap();
    assert_eq!(p.stats.materialization_points, 2);
    assert_eq!(n.stats.materialization_points, 3);
    let rows = |r: &smoke_core::lineage_query::QueryResult| {
        let mut v: Vec<_> = r.relation().rows().collect();
        v.sort_by_key(|r| format!("{r:?}"));
        v
    };
    assert_eq!(rows(&p), rows(&n));
    for o in 0..p.row_count() as u32 {
        assert_eq!(
            s.backward(&p.handle, &[o], "A").unwrap(),
            s.backward(&n.handle, &[o], "A").unwrap()
        );
    }
}

#[test]
fn lazy_matches_captured_lineage() {
    let mut c = Catalog::new();
    c.add(gen_zipf(5_000, 50, 1.0, 7));
    let mut s = Session::new(c);
    let r = s.execute("SELECT z, count(*), sum(v) FROM zipf GROUP BY z").unwrap();
    for o in 0..r.row_count() as u32 {
        assert_eq!(
            s.backward(&r.handle, &[o], "zipf").unwrap(),
            s.lazy_backward(&r.handle, &[o], "zipf").unwrap()
        );
    }
    let all: Vec<u32> = (0..r.row_count() as u32).collect();
    assert_eq!(s.lazy_backward(&r.handle, &all, "zipf").unwrap().len(), 5_000);
}

#[test]
fn cube_answers_without_scanning() {
    let mut c = Catalog::new();
    c.add(gen_zipf(2_000, 20, 1.0, 3));
    let mut s = Session::new(c);
    let w = WorkloadSpec::from_json(
        r#"{"templates": [{"direction": "backward", "base_relation": "zipf",
            "extra_groupby": {"attrs": ["id % 3"], "aggs": ["count(*)", "sum(v)"]}}]}"#,
    )
    .unwrap();
    s.execute_with(
        "SELECT z, count(*) FROM zipf GROUP BY z",
        &ExecOptions::mode(CaptureMode::Inject).with_workload(w).with_handle("h"),
    )
    .unwrap();
    let q = "SELECT id % 3, sum(v), count(*) FROM backward(h, [0, 1], zipf) GROUP BY id % 3";
    let fetched = s.execute(q).unwrap();
    assert!(fetched.stats.cube_fetch);
    assert_eq!(fetched.stats.base_scans, 0);
    let rids = s.backward("h", &[0, 1], "zipf").unwrap();
    let list: Vec<String> = rids.iter().map(|r| r.to_string()).collect();
    let lazy = s
        .execute(&format!(
            "SELECT id % 3, sum(v), count(*) FROM zipf WHERE id IN ({}) GROUP BY id % 3",
            list.join(", ")
        ))
        .unwrap();
    let sorted = |r: &Relation| {
        let mut v: Vec<Vec<Value>> = r.rows().collect();
        v.sort_by_key(|row| format!("{:?}", row[0]));
        v
    };
    let (a, b) = (sorted(fetched.relation()), sorted(lazy.relation()));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x[0], y[0]);
        assert_eq!(x[2], y[2]);
        let (Value::Float(p), Value::Float(q)) = (&x[1], &y[1]) else { panic!() };
        assert!((p - q).abs() <= 1e-9 * q.abs().max(1.0));
    }
}

#[test]
fn partitioned_index_skips_data() {
    let mut c = Catalog::new();
    c.add(gen_zipf(3_000, 10, 1.0, 5));
    let mut s = Session::new(c);
    let w = WorkloadSpec::from_json(
        r#"{"templates": [{"direction": "backward", "base_relation": "zipf",
            "param_predicates": [{"attr": "z", "domain": [1,2,3,4,5,6,7,8,9,10]}]}]}"#,
    )
    .unwrap();
    s.execute_with(
        "SELECT id % 4 AS b, count(*) FROM zipf GROUP BY id % 4",
        &ExecOptions::mode(CaptureMode::Inject).with_workload(w).with_handle("h"),
    )
    .unwrap();
    s.execute_with(
        "SELECT id % 4 AS b, count(*) FROM zipf GROUP BY id % 4",
        &ExecOptions::mode(CaptureMode::Inject).with_handle("plain"),
    )
    .unwrap();
    for z in 1..=10 {
        let q = |h: &str| format!("SELECT count(*), sum(v) FROM backward({h}, [2], zipf) WHERE z = {z}");
        let fast = s.execute(&q("h")).unwrap();
        let slow = s.execute(&q("plain")).unwrap();
        assert!(fast.stats.data_skipping);
        assert!(!slow.stats.data_skipping);
        assert_eq!(fast.relation().row(0)[0], slow.relation().row(0)[0]);
        assert!(fast.stats.base_scans <= slow.stats.base_scans);
    }
}

#[test]
fn callback_rejects_workload_options() {
    let mut s = customers_orders();
    let w = WorkloadSpec::backward("A");
    let err = s
        .execute_with(COUNTS, &ExecOptions::mode(CaptureMode::Callback).with_workload(w))
        .unwrap_err();
    assert!(matches!(err, Error::Unsupported(_)));
}
