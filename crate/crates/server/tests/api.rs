use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const DIMS: [&str; 4] = ["latlon_bin", "day_bin", "delay_bin", "carrier"];

async fn call(app: &Router, path: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(path)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn flights(app: &Router, id: &str, n: usize, strategy: &str) -> Value {
    let (s, _) = call(app, "/load", json!({"session_id": id, "generator": "flights", "params": {"n": n, "seed": 3}})).await;
    assert_eq!(s, StatusCode::OK);
    let (s, v) = call(app, "/views", json!({"session_id": id, "dims": DIMS, "strategy": strategy})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    v
}

fn counts(views: &Value) -> Vec<Vec<i64>> {
    views["views"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["bins"].as_array().unwrap().iter().map(|b| b["count"].as_i64().unwrap()).collect())
        .collect()
}

fn key(views: &Value, view: usize, bin: usize) -> Value {
    views["views"][view]["bins"][bin]["key"].clone()
}

#[tokio::test]
async fn load_reports_rows_and_rejects_duplicates() {
    let app = smoke_server::router();
    let (s, v) = call(&app, "/load", json!({"session_id": "a", "generator": "flights", "params": {"n": 100_000}})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["row_count"], 100_000);
    assert!(v["latency_ms"].is_number());
    let (s, v) = call(&app, "/load", json!({"session_id": "a", "generator": "zipf"})).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert!(v["latency_ms"].is_number());
    let (s, v) = call(&app, "/load", json!({"generator": "zipf", "params": {"n": 0}})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["row_count"], 0);
    assert!(v["session_id"].is_string());
}

#[tokio::test]
async fn bad_params_are_rejected() {
    let app = smoke_server::router();
    for body in [
        json!({"generator": "nope"}),
        json!({"generator": "zipf", "params": {"groups": 0}}),
        json!({"generator": "zipf", "params": {"n": "many"}}),
        json!({"generator": "flights", "params": {"n": 1u64 << 40}}),
        json!({"generator": "csv", "params": {}}),
        json!({"generator": "csv", "params": {"path": "/nonexistent.csv"}}),
    ] {
        let (s, v) = call(&app, "/load", body.clone()).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{body} -> {v}");
        assert!(v["error"].is_string());
    }
}

#[tokio::test]
async fn csv_tables_load_with_inferred_types() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    std::fs::write(&path, "k,name\n1,x\n2,y\n1,z\n").unwrap();
    let app = smoke_server::router();
    let (s, v) = call(&app, "/load", json!({"session_id": "c", "generator": "csv", "params": {"path": path}})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["row_count"], 3);
    let (s, v) = call(&app, "/views", json!({"session_id": "c", "dims": ["k"], "strategy": "bt"})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["views"][0]["bins"], json!([{"key": "1", "count": 2}, {"key": "2", "count": 1}]));
}

#[tokio::test]
async fn views_conserve_counts_and_validate_input() {
    let app = smoke_server::router();
    let v = flights(&app, "f", 20_000, "bt_ft").await;
    assert!(v["capture_ms"].is_number() && v["latency_ms"].is_number());
    let c = counts(&v);
    assert_eq!(c.len(), 4);
    for (i, view) in c.iter().enumerate() {
        assert_eq!(view.iter().sum::<i64>(), 20_000);
        assert_eq!(v["views"][i]["view_id"], i);
        assert_eq!(v["views"][i]["dim"], DIMS[i]);
    }
    let (s, _) = call(&app, "/views", json!({"session_id": "f", "dims": ["carrier"]})).await;
    assert_eq!(s, StatusCode::CONFLICT);

    call(&app, "/load", json!({"session_id": "g", "generator": "flights", "params": {"n": 100}})).await;
    let (s, _) = call(&app, "/views", json!({"session_id": "g", "dims": ["nope"]})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "/views", json!({"session_id": "g", "dims": ["carrier"], "strategy": "magic"})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "/views", json!({"session_id": "missing", "dims": ["carrier"]})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn brushes_agree_across_strategies() {
    let app = smoke_server::router();
    let base = flights(&app, "lazy", 30_000, "lazy").await;
    flights(&app, "bt", 30_000, "bt").await;
    flights(&app, "bt_ft", 30_000, "bt_ft").await;
    let original = counts(&base);
    for (view, bins) in [(3, vec![0]), (2, vec![1, 4]), (1, vec![2, 2, 7]), (0, vec![5])] {
        let keys: Vec<Value> = bins.iter().map(|&b| key(&base, view, b)).collect();
        let mut answers = Vec::new();
        for id in ["lazy", "bt", "bt_ft"] {
            let (s, v) = call(&app, "/brush", json!({"session_id": id, "view_id": view, "bin_keys": keys})).await;
            assert_eq!(s, StatusCode::OK, "{v}");
            assert!(v["latency_ms"].is_number());
            answers.push(counts(&v));
        }
        assert_eq!(answers[0], answers[1]);
        assert_eq!(answers[0], answers[2]);
        let got = &answers[0];
        assert_eq!(got[view], original[view], "brushed view unchanged");
        let mut uniq = bins.clone();
        uniq.dedup();
        let selected: i64 = uniq.iter().map(|&b| original[view][b]).sum();
        for (w, c) in got.iter().enumerate().filter(|(w, _)| *w != view) {
            assert_eq!(c.iter().sum::<i64>(), selected, "view {w}");
        }
    }
}

#[tokio::test]
async fn brush_edge_cases() {
    let app = smoke_server::router();
    let v = flights(&app, "e", 5_000, "bt_ft").await;
    let (s, b) = call(&app, "/brush", json!({"session_id": "e", "view_id": 3, "bin_keys": []})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(counts(&b), counts(&v));
    let (s, _) = call(&app, "/brush", json!({"session_id": "e", "view_id": 3, "bin_keys": ["no such bin"]})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "/brush", json!({"session_id": "e", "view_id": 9, "bin_keys": []})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let numeric = key(&v, 2, 0).as_str().unwrap().parse::<i64>().unwrap();
    let (s, _) = call(&app, "/brush", json!({"session_id": "e", "view_id": 2, "bin_keys": [numeric]})).await;
    assert_eq!(s, StatusCode::OK);

    call(&app, "/load", json!({"session_id": "k", "generator": "zipf", "params": {"n": 500, "groups": 1}})).await;
    let (_, v) = call(&app, "/views", json!({"session_id": "k", "dims": ["z", "id"], "strategy": "bt"})).await;
    let (s, b) = call(&app, "/brush", json!({"session_id": "k", "view_id": 0, "bin_keys": ["1"]})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(counts(&b), counts(&v));

    call(&app, "/load", json!({"session_id": "n", "generator": "zipf", "params": {"n": 10}})).await;
    let (s, _) = call(&app, "/brush", json!({"session_id": "n", "view_id": 0, "bin_keys": []})).await;
    assert_eq!(s, StatusCode::CONFLICT);
}
