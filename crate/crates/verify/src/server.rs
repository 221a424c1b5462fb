//! HTTP+JSON front end for a [`QueueStore`].
//!
//! | route | purpose |
//! |---|---|
//! | `GET /queues/{id}/next` | lease the next item (`X-Verifier-Id` header) |
//! | `POST /items/{id}/verdict` | `{"verdict": "accept" \| "reject" \| "correct", "corrected"?}` |
//! | `GET /queues/{id}/stats` | per-phase accuracy |
//! | `GET /queues/{id}/export-seeds` | accepted matches as seed lines |
//!
//! Anything else falls through to the static UI bundle when one is mounted.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use lexalign_core::lexmodel::SenseId;
use lexalign_core::store::write_seeds;

use crate::queue::{ItemId, PhaseStats, QueueError, Verdict, VerificationItem};
use crate::store::{QueueStore, StoreError};

pub const VERIFIER_HEADER: &str = "x-verifier-id";
pub const BIND_ENV: &str = "LEXALIGN_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8731";

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    })
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<Mutex<QueueStore>>,
    clock: Clock,
}

impl AppState {
    pub fn new(store: QueueStore, clock: Clock) -> Self {
        AppState {
            store: Arc::new(Mutex::new(store)),
            clock,
        }
    }

    pub fn store(&self) -> &Arc<Mutex<QueueStore>> {
        &self.store
    }
}

/// Resolves the listen address: `LEXALIGN_BIND` if set, else the default,
/// with `port` overriding the port part.
pub fn bind_address(env_value: Option<&str>, port: Option<u16>) -> String {
    let base = env_value.filter(|v| !v.is_empty()).unwrap_or(DEFAULT_BIND);
    match port {
        Some(p) => {
            let host = base.rsplit_once(':').map(|(h, _)| h).unwrap_or(base);
            format!("{host}:{p}")
        }
        None => base.to_string(),
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(err: StoreError) -> Self {
        let status = match &err {
            StoreError::Queue(QueueError::UnknownItem(_)) => StatusCode::NOT_FOUND,
            StoreError::Queue(QueueError::StaleLease { .. }) => StatusCode::CONFLICT,
            StoreError::Queue(QueueError::Model(_)) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, err.to_string())
    }
}

fn verifier(headers: &HeaderMap) -> Option<String> {
    headers
        .get(VERIFIER_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(str::to_string)
}

fn check_queue(store: &QueueStore, id: &str) -> Result<(), ApiError> {
    match &store.queue().run_id {
        Some(run) if run == id => Ok(()),
        _ => Err(ApiError(StatusCode::NOT_FOUND, format!("no queue named {id}"))),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ItemView {
    pub queue: String,
    pub pending: usize,
    pub total: usize,
    pub item: VerificationItem,
}

async fn next(
    State(state): State<AppState>,
    Path(queue): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let who = verifier(&headers)
        .ok_or_else(|| ApiError(StatusCode::BAD_REQUEST, format!("missing {VERIFIER_HEADER} header")))?;
    let mut store = state.store.lock().expect("store lock");
    check_queue(&store, &queue)?;
    match store.next_item(&who, (state.clock)())? {
        Some(item) => Ok(Json(ItemView {
            queue,
            pending: store.queue().pending(),
            total: store.queue().items().len(),
            item,
        })
        .into_response()),
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerdictBody {
    verdict: String,
    #[serde(default)]
    corrected: Option<SenseId>,
}

async fn verdict(
    State(state): State<AppState>,
    Path(item): Path<ItemId>,
    headers: HeaderMap,
    Json(body): Json<VerdictBody>,
) -> Result<Response, ApiError> {
    let who = verifier(&headers).unwrap_or_else(|| "anonymous".to_string());
    let verdict = match (body.verdict.as_str(), body.corrected) {
        ("accept", None) => Verdict::Accept,
        ("reject", None) => Verdict::Reject,
        ("correct", Some(corrected)) => Verdict::Correct { corrected },
        ("correct", None) => {
            return Err(ApiError(
                StatusCode::BAD_REQUEST,
                "correct needs a corrected sense".into(),
            ))
        }
        (other, _) => return Err(ApiError(StatusCode::BAD_REQUEST, format!("unknown verdict '{other}'"))),
    };
    let mut store = state.store.lock().expect("store lock");
    let record = store.record_verdict(item, verdict, &who, (state.clock)())?;
    Ok(Json(record).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatsView {
    pub queue: String,
    pub pending: usize,
    pub phases: Vec<PhaseStats>,
}

async fn stats(State(state): State<AppState>, Path(queue): Path<String>) -> Result<Json<StatsView>, ApiError> {
    let store = state.store.lock().expect("store lock");
    check_queue(&store, &queue)?;
    Ok(Json(StatsView {
        pending: store.queue().pending(),
        phases: store.queue().stats(),
        queue,
    }))
}

async fn export_seeds(State(state): State<AppState>, Path(queue): Path<String>) -> Result<Response, ApiError> {
    let store = state.store.lock().expect("store lock");
    check_queue(&store, &queue)?;
    let seeds = store.queue().export_seeds();
    let mut body = Vec::new();
    write_seeds(seeds.iter().map(|(l, r)| (l, r)), &mut body)
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/queues/{id}/next", get(next))
        .route("/queues/{id}/stats", get(stats))
        .route("/queues/{id}/export-seeds", get(export_seeds))
        .route("/items/{id}/verdict", post(verdict))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until the process is stopped.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}
