//! HTTP JSON API over a [`HilQueue`], with server-sent ledger events.

use std::convert::Infallible;
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use forge_core::orchestr::{HilDecision, HilItem, HilTransitionError};
use futures::{Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio_stream::wrappers::BroadcastStream;

use crate::dataset::DatasetRecord;
use crate::queue::{HilError, HilQueue};

/// Environment variable holding the static bearer token.
pub const TOKEN_ENV: &str = "FORGE_HIL_TOKEN";

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    /// When set, every request needs `Authorization: Bearer <token>`.
    pub token: Option<String>,
}

impl ServeConfig {
    /// Token from [`TOKEN_ENV`]; an unset or empty variable disables auth.
    pub fn from_env(addr: SocketAddr) -> Self {
        let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        ServeConfig { addr, token }
    }
}

#[derive(Clone)]
struct AppState {
    queue: Arc<HilQueue>,
    token: Option<Arc<str>>,
}

#[derive(Debug, Deserialize)]
pub struct ResolveBody {
    pub decision: String,
    #[serde(default)]
    pub correction: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResolveResponse {
    pub item: HilItem,
    pub record: DatasetRecord,
    pub cache_entry: Option<u64>,
}

struct ApiError(StatusCode, String);

impl From<HilError> for ApiError {
    fn from(e: HilError) -> Self {
        let status = match &e {
            HilError::UnknownRun(_) | HilError::UnknownItem(_) => StatusCode::NOT_FOUND,
            HilError::Transition(HilTransitionError::IllegalTransition { .. }) | HilError::DuplicateItem(_) => {
                StatusCode::CONFLICT
            }
            HilError::Transition(HilTransitionError::CorrectionMismatch) => StatusCode::BAD_REQUEST,
            HilError::InvalidCorrection { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

async fn auth(State(s): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &s.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == &**token);
        if !ok {
            return ApiError(StatusCode::UNAUTHORIZED, "missing or wrong bearer token".into()).into_response();
        }
    }
    next.run(req).await
}

async fn list_runs(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.queue.runs())
}

async fn run_ledger(State(s): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(s.queue.ledger(&id)?.entries().to_vec()))
}

async fn run_coverage(State(s): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    match s.queue.coverage(&id)? {
        Some(c) => Ok(Json(c).into_response()),
        None => Err(ApiError(StatusCode::NOT_FOUND, format!("run `{id}` has no coverage report"))),
    }
}

async fn pending(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.queue.pending())
}

async fn resolve(
    State(s): State<AppState>,
    Path(item): Path<String>,
    Json(body): Json<ResolveBody>,
) -> Result<impl IntoResponse, ApiError> {
    let decision = HilDecision::from_parts(&body.decision, body.correction).map_err(HilError::from)?;
    let queue = s.queue.clone();
    let done = tokio::task::spawn_blocking(move || queue.resolve(&item, decision, Utc::now()))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(ResolveResponse { item: done.item, record: done.record, cache_entry: done.cache_entry }))
}

async fn events(
    State(s): State<AppState>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, ApiError> {
    let (snapshot, rx) = s.queue.subscribe(&id)?;
    let last = snapshot.last().map(|e| e.seq);
    let live = BroadcastStream::new(rx).filter_map(move |r| async move {
        // a lagging subscriber skips what it missed
        r.ok().filter(|e| last.is_none_or(|l| e.seq > l))
    });
    let stream = futures::stream::iter(snapshot).chain(live).map(|e| {
        let data = serde_json::to_string(&e).expect("entry serializes");
        Ok(SseEvent::default().id(e.seq.to_string()).event(e.event.kind_name()).data(data))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

pub fn router(queue: Arc<HilQueue>, token: Option<String>) -> Router {
    let state = AppState { queue, token: token.map(Arc::from) };
    Router::new()
        .route("/runs", get(list_runs))
        .route("/runs/{id}/ledger", get(run_ledger))
        .route("/runs/{id}/coverage", get(run_coverage))
        .route("/hil/pending", get(pending))
        .route("/hil/{item}/resolve", post(resolve))
        .route("/events/{run_id}", get(events))
        .layer(middleware::from_fn_with_state(state.clone(), auth))
        .with_state(state)
}

/// Bind and serve until the process stops.
pub async fn serve(queue: Arc<HilQueue>, config: ServeConfig) -> io::Result<()> {
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    tracing::info!(addr = %listener.local_addr()?, auth = config.token.is_some(), "HIL API listening");
    axum::serve(listener, router(queue, config.token)).await
}
