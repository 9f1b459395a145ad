//! HTTP JSON API for loading data, registering crossfilter views and brushing.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as JsonValue};
use smoke_core::relstore::{gen_flights, gen_zipf, load_csv_inferred, Relation};
use smoke_core::xfilter::{Crossfilter, Strategy};

/// Largest generated table accepted by `/load`.
pub const MAX_GENERATED_ROWS: usize = 10_000_000;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<smoke_core::Error> for ApiError {
    fn from(e: smoke_core::Error) -> Self {
        ApiError::bad(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.message, "latency_ms": 0.0}))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

struct Dataset {
    base: Arc<Relation>,
    xfilter: Option<Crossfilter>,
    /// Stringified bin key -> bin, per view.
    bins: Vec<HashMap<String, usize>>,
}

/// Loaded sessions; each is locked on its own so distinct sessions proceed
/// concurrently.
#[derive(Default)]
pub struct AppState {
    sessions: Mutex<HashMap<String, Arc<Mutex<Dataset>>>>,
    next_id: AtomicU64,
}

impl AppState {
    fn session(&self, id: &str) -> Result<Arc<Mutex<Dataset>>, ApiError> {
        self.sessions
            .lock()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}")))
    }
}

pub fn router() -> Router {
    router_with(Arc::new(AppState::default()))
}

pub fn router_with(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/load", post(load))
        .route("/views", post(views))
        .route("/brush", post(brush))
        .with_state(state)
}

pub async fn serve(host: &str, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    axum::serve(listener, router()).await
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

#[derive(Deserialize)]
pub struct LoadRequest {
    pub session_id: Option<String>,
    pub generator: String,
    #[serde(default)]
    pub params: JsonValue,
}

#[derive(Serialize, Deserialize)]
pub struct LoadResponse {
    pub session_id: String,
    pub row_count: usize,
    pub latency_ms: f64,
}

fn param_usize(p: &JsonValue, key: &str, default: usize) -> Result<usize, ApiError> {
    match p.get(key) {
        None | Some(JsonValue::Null) => Ok(default),
        Some(v) => v
            .as_u64()
            .map(|x| x as usize)
            .ok_or_else(|| ApiError::bad(format!("{key} must be a non-negative integer"))),
    }
}

fn param_f64(p: &JsonValue, key: &str, default: f64) -> Result<f64, ApiError> {
    match p.get(key) {
        None | Some(JsonValue::Null) => Ok(default),
        Some(v) => v.as_f64().ok_or_else(|| ApiError::bad(format!("{key} must be a number"))),
    }
}

fn generate(generator: &str, p: &JsonValue) -> Result<Relation, ApiError> {
    if !p.is_null() && !p.is_object() {
        return Err(ApiError::bad("params must be an object"));
    }
    let seed = param_usize(p, "seed", 42)? as u64;
    let sized = |default| {
        let n = param_usize(p, "n", default)?;
        if n > MAX_GENERATED_ROWS {
            return Err(ApiError::bad(format!("n exceeds {MAX_GENERATED_ROWS}")));
        }
        Ok(n)
    };
    match generator {
        "flights" => Ok(gen_flights(sized(100_000)?, seed)),
        "zipf" => {
            let n = sized(100_000)?;
            let groups = param_usize(p, "groups", 100)?;
            let theta = param_f64(p, "theta", 1.0)?;
            if groups == 0 || !(theta >= 0.0 && theta.is_finite()) {
                return Err(ApiError::bad("zipf needs groups >= 1 and a finite theta >= 0"));
            }
            Ok(gen_zipf(n, groups, theta, seed))
        }
        "csv" => {
            let path = p
                .get("path")
                .and_then(JsonValue::as_str)
                .ok_or_else(|| ApiError::bad("csv needs a path"))?;
            let delim = match p.get("delimiter").and_then(JsonValue::as_str) {
                None => ',',
                Some(d) if d.chars().count() == 1 => d.chars().next().unwrap(),
                Some(d) => return Err(ApiError::bad(format!("bad delimiter {d:?}"))),
            };
            Ok(load_csv_inferred(path, delim)?)
        }
        other => Err(ApiError::bad(format!("unknown generator {other}"))),
    }
}

async fn load(State(state): State<Arc<AppState>>, Json(req): Json<LoadRequest>) -> ApiResult<LoadResponse> {
    let t = Instant::now();
    if let Some(id) = &req.session_id {
        if state.sessions.lock().expect("session map poisoned").contains_key(id) {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("session {id} already has data")));
        }
    }
    let rel = blocking(move || generate(&req.generator, &req.params)).await?;
    let id = req
        .session_id
        .unwrap_or_else(|| format!("s{}", state.next_id.fetch_add(1, Ordering::Relaxed) + 1));
    let row_count = rel.row_count();
    let dataset = Dataset {
        base: Arc::new(rel),
        xfilter: None,
        bins: Vec::new(),
    };
    {
        let mut sessions = state.sessions.lock().expect("session map poisoned");
        if sessions.contains_key(&id) {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("session {id} already has data")));
        }
        sessions.insert(id.clone(), Arc::new(Mutex::new(dataset)));
    }
    Ok(Json(LoadResponse {
        session_id: id,
        row_count,
        latency_ms: ms(t),
    }))
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct Bin {
    pub key: String,
    pub count: i64,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct ViewOut {
    pub view_id: usize,
    pub dim: String,
    pub bins: Vec<Bin>,
}

#[derive(Deserialize)]
pub struct ViewsRequest {
    pub session_id: String,
    pub dims: Vec<String>,
    #[serde(default = "default_strategy")]
    pub strategy: String,
}

fn default_strategy() -> String {
    "bt_ft".into()
}

#[derive(Serialize, Deserialize)]
pub struct ViewsResponse {
    pub views: Vec<ViewOut>,
    pub capture_ms: f64,
    pub latency_ms: f64,
}

fn render(x: &Crossfilter, counts: &[Vec<i64>]) -> Vec<ViewOut> {
    x.views()
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(i, (v, c))| ViewOut {
            view_id: i,
            dim: v.dim.clone(),
            bins: v
                .keys
                .iter()
                .zip(c)
                .map(|(k, &count)| Bin {
                    key: k.to_string(),
                    count,
                })
                .collect(),
        })
        .collect()
}

async fn views(State(state): State<Arc<AppState>>, Json(req): Json<ViewsRequest>) -> ApiResult<ViewsResponse> {
    let t = Instant::now();
    let strategy: Strategy = req.strategy.parse().map_err(ApiError::from)?;
    if strategy == Strategy::PartialCube {
        return Err(ApiError::bad("strategy must be lazy, bt or bt_ft"));
    }
    let ds = state.session(&req.session_id)?;
    blocking(move || {
        let mut ds = ds.lock().expect("session poisoned");
        if ds.xfilter.is_some() {
            return Err(ApiError::new(StatusCode::CONFLICT, "views already registered"));
        }
        let dims: Vec<&str> = req.dims.iter().map(String::as_str).collect();
        let x = Crossfilter::new(ds.base.clone(), &dims, strategy)?;
        let counts: Vec<Vec<i64>> = x.views().iter().map(|v| v.counts.clone()).collect();
        let views = render(&x, &counts);
        ds.bins = x
            .views()
            .iter()
            .map(|v| v.keys.iter().enumerate().map(|(i, k)| (k.to_string(), i)).collect())
            .collect();
        let capture_ms = x.capture_ms;
        ds.xfilter = Some(x);
        Ok(Json(ViewsResponse {
            views,
            capture_ms,
            latency_ms: ms(t),
        }))
    })
    .await
}

#[derive(Deserialize)]
pub struct BrushRequest {
    pub session_id: String,
    pub view_id: usize,
    #[serde(default)]
    pub bin_keys: Vec<JsonValue>,
}

#[derive(Serialize, Deserialize)]
pub struct BrushResponse {
    pub views: Vec<ViewOut>,
    pub latency_ms: f64,
}

fn key_text(k: &JsonValue) -> String {
    match k {
        JsonValue::String(s) => s.clone(),
        other => other.to_string(),
    }
}

async fn brush(State(state): State<Arc<AppState>>, Json(req): Json<BrushRequest>) -> ApiResult<BrushResponse> {
    let t = Instant::now();
    let ds = state.session(&req.session_id)?;
    blocking(move || {
        let ds = ds.lock().expect("session poisoned");
        let x = ds
            .xfilter
            .as_ref()
            .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "no views registered"))?;
        let lookup = ds
            .bins
            .get(req.view_id)
            .ok_or_else(|| ApiError::bad(format!("unknown view {}", req.view_id)))?;
        let bins = req
            .bin_keys
            .iter()
            .map(|k| {
                let k = key_text(k);
                lookup
                    .get(&k)
                    .copied()
                    .ok_or_else(|| ApiError::bad(format!("view {} has no bin {k:?}", req.view_id)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let counts = x.brush(req.view_id, &bins)?;
        Ok(Json(BrushResponse {
            views: render(x, &counts),
            latency_ms: ms(t),
        }))
    })
    .await
}
