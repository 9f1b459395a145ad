use smoke_core::lineage_query::{ExecOptions, Session};
use smoke_core::operators::CaptureMode;
use smoke_core::tpch::{self, Query};

#[test]
fn replay_reproduces_every_output_row() {
    let c = tpch::generate_catalog(0.002).unwrap();
    for q in Query::ALL {
        let out = tpch::replay_check(c.clone(), q, 1e-9).unwrap();
        assert!(out.rows > 0, "{q:?} produced no rows");
        assert!(out.mismatches.is_empty(), "{q:?}: {:?}", &out.mismatches[..1]);
    }
}

#[test]
fn generated_tables_round_trip_through_loader() {
    let dir = tempfile::tempdir().unwrap();
    tpch::generate(0.001, dir.path()).unwrap();
    let c = tpch::load(dir.path()).unwrap();
    assert_eq!(c.get("nation").unwrap().row_count(), 25);
    assert_eq!(c.get("customer").unwrap().row_count(), 150);
    assert_eq!(c.get("orders").unwrap().row_count(), 1500);
    assert!(c.get("lineitem").unwrap().row_count() > 5000);
    assert!(matches!(
        tpch::load(&dir.path().join("missing")),
        Err(smoke_core::Error::Invalid(_))
    ));
}

#[test]
fn q1_groups_match_a_plain_run() {
    let c = tpch::generate_catalog(0.001).unwrap();
    let mut s = Session::new(c);
    let a = s.execute(tpch::Q1).unwrap();
    let b = s
        .execute_with(tpch::Q1, &ExecOptions::mode(CaptureMode::None).naive(true))
        .unwrap();
    assert_eq!(a.row_count(), 4);
    assert_eq!(a.row_count(), b.row_count());
}

mod drill_down {
    use super::*;
    use smoke_core::relstore::Value;
    use smoke_core::tpch::{drill, same_groups, SHIPINSTRUCTS, SHIPMODES};

    fn text(v: &Value) -> String {
        match v {
            Value::Text(s) => s.to_string(),
            other => panic!("expected text, got {other:?}"),
        }
    }

    fn session() -> Session {
        Session::new(tpch::generate_catalog(0.002).unwrap())
    }

    #[test]
    fn q1a_matches_lazy_rewrite() {
        let mut s = session();
        let q1 = s
            .execute_with(tpch::Q1, &ExecOptions::mode(CaptureMode::Inject).with_handle("q1"))
            .unwrap();
        let groups: Vec<Vec<Value>> = q1.relation().rows().collect();
        for (o, g) in groups.iter().enumerate() {
            let eager = s.execute(&drill::q1a("q1", o as u32)).unwrap();
            let lazy = s.execute(&drill::q1a_lazy(&text(&g[0]), &text(&g[1]))).unwrap();
            assert!(eager.row_count() > 0);
            assert!(same_groups(eager.relation(), lazy.relation(), 2, 1e-9));
        }
    }

    #[test]
    fn skipping_and_pushdown_agree_with_scans() {
        let mut s = session();
        let skip = ExecOptions::mode(CaptureMode::Inject)
            .with_workload(drill::skipping_workload())
            .with_handle("q1p");
        let q1 = s.execute_with(tpch::Q1, &skip).unwrap();
        s.execute_with(tpch::Q1, &ExecOptions::mode(CaptureMode::Inject).with_handle("q1"))
            .unwrap();
        let groups: Vec<Vec<Value>> = q1.relation().rows().collect();
        let (flag, status) = (text(&groups[0][0]), text(&groups[0][1]));
        for mode in SHIPMODES {
            for instr in SHIPINSTRUCTS {
                let fast = s.execute(&drill::q1b("q1p", 0, mode, instr)).unwrap();
                assert!(fast.stats.data_skipping);
                let slow = s.execute(&drill::q1b("q1", 0, mode, instr)).unwrap();
                let lazy = s.execute(&drill::q1b_lazy(&flag, &status, mode, instr)).unwrap();
                assert!(same_groups(fast.relation(), slow.relation(), 2, 1e-9));
                assert!(same_groups(fast.relation(), lazy.relation(), 2, 1e-9));
            }
        }
        let cube = ExecOptions::mode(CaptureMode::Inject)
            .with_workload(drill::pushdown_workload())
            .with_handle("q1b");
        let b = s.execute_with(&drill::q1b("q1", 0, "MAIL", "NONE"), &cube).unwrap();
        assert!(b.row_count() > 0);
        for o in 0..b.row_count() as u32 {
            let row = b.relation().row(o);
            let (Value::Int(y), Value::Int(m)) = (&row[0], &row[1]) else { panic!("{row:?}") };
            let c = s.execute(&drill::q1c("q1b", o)).unwrap();
            assert!(c.stats.cube_fetch);
            assert_eq!(c.stats.base_scans, 0);
            let lazy = s
                .execute(&drill::q1c_lazy(&flag, &status, "MAIL", "NONE", *y, *m))
                .unwrap();
            assert!(same_groups(c.relation(), lazy.relation(), 3, 1e-9));
        }
    }
}
