use std::process::{Command, Output};

use serde_json::Value;

fn smoke(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smoke")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = smoke(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn micro_report_has_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("micro");
    ok(&[
        "bench", "micro", "--kind", "groupby", "--n", "2e4", "--groups", "50", "--modes", "none,inject,defer,callback",
        "--stats-cardinalities", "--runs", "2", "--warmups", "0", "--out", stem.to_str().unwrap(),
    ]);
    let json: Value = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json")).unwrap()).unwrap();
    let modes: Vec<&str> = json["runs"].as_array().unwrap().iter().map(|r| r["mode"].as_str().unwrap()).collect();
    assert_eq!(modes, ["none", "inject", "inject+stats", "defer", "callback"]);
    let csv = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn tpch_from_generated_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tbl");
    ok(&["tpchgen", "--sf", "0.001", "--data", data.to_str().unwrap()]);
    let out = ok(&[
        "bench", "tpch", "--query", "q1,q12", "--data", data.to_str().unwrap(), "--modes", "inject", "--runs", "1",
        "--warmups", "0",
    ]);
    let json: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(json["runs"].as_array().unwrap().len(), 4);
}

#[test]
fn crossfilter_bench_runs() {
    let out = ok(&["bench", "xfilter", "--strategy", "all", "--rows", "2000"]);
    let json: Value = serde_json::from_str(&out).unwrap();
    let modes: Vec<&str> = json["runs"].as_array().unwrap().iter().map(|r| r["mode"].as_str().unwrap()).collect();
    assert_eq!(modes.len(), 4);
}

#[test]
fn fd_profile_finds_violations() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("addr.csv");
    std::fs::write(&table, "zip,state\n10001,NY\n10001,NJ\n60601,IL\n").unwrap();
    for approach in ["cd", "ug"] {
        let out = ok(&["profile", "fd", "--table", table.to_str().unwrap(), "--fd", "zip->state", "--approach", approach, "--graph"]);
        assert!(out.contains("\"10001\""), "{out}");
        assert!(!out.contains("\"60601\""), "{out}");
    }
}

#[test]
fn query_prints_rows_and_lineage() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    std::fs::write(&table, "k,v\n1,10\n2,20\n1,30\n").unwrap();
    let spec = format!("t={}", table.display());
    let out = ok(&["query", "SELECT k, sum(v) FROM t GROUP BY k", "--table", &spec, "--trace", "0"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[1..3], ["1,40", "2,20"]);
    assert_eq!(lines[3], "t: [0, 2]");
}

#[test]
fn bad_arguments_fail() {
    assert!(!smoke(&["bench", "micro", "--kind", "nope"]).status.success());
    assert!(!smoke(&["bench", "micro", "--n", "1.5"]).status.success());
    assert!(!smoke(&["profile", "fd", "--table", "/nonexistent.csv", "--fd", "a->b"]).status.success());
    assert!(!smoke(&["query", "SELEKT 1"]).status.success());
}
