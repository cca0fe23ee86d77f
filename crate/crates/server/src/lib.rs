//! HTTP/JSON front end for interactive matching sessions.
//!
//! | method | path                       | body               | reply              |
//! |--------|----------------------------|--------------------|--------------------|
//! | POST   | `/sessions`                | [`CreateSession`]  | 201 snapshot       |
//! | POST   | `/sessions/{id}/decisions` | [`DecisionBody`]   | 200 verdict        |
//! | GET    | `/sessions/{id}`           |                    | 200 snapshot       |
//! | POST   | `/sessions/{id}/finalize`  | [`FinalizeBody`]   | 200 snapshot       |
//! | GET    | `/tasks`                   |                    | 200 task summaries |
//! | GET    | `/tasks/{id}`              |                    | 200 task detail    |
//!
//! Failures carry `{"error": message, "kind": class}` with status 400 for
//! invalid input, 404 for unknown ids, 409 for closed sessions, stale
//! decision indices or a missing calibrator.

use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use procmatch::boost::{RbConfig, RbVariant};
use procmatch::io::{load_task_bundle, TaskBundle};
use procmatch::model::Pair;
use procmatch::session::{CreateSession, ErrorClass, SessionError, SessionManager};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionBody {
    pub row: usize,
    pub col: usize,
    pub confidence: f64,
    /// Optimistic concurrency guard: the number of decisions the client
    /// believes the session already holds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_index: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalizeBody {
    #[serde(default = "default_variant")]
    pub variant: RbVariant,
    #[serde(default = "default_param")]
    pub param: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_variant() -> RbVariant {
    RbConfig::default().variant
}

fn default_param() -> f64 {
    RbConfig::default().param
}

fn default_epsilon() -> f64 {
    RbConfig::DEFAULT_EPSILON
}

impl Default for FinalizeBody {
    fn default() -> Self {
        FinalizeBody {
            variant: default_variant(),
            param: default_param(),
            epsilon: default_epsilon(),
        }
    }
}

impl From<FinalizeBody> for RbConfig {
    fn from(b: FinalizeBody) -> Self {
        RbConfig {
            variant: b.variant,
            param: b.param,
            epsilon: b.epsilon,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub kind: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: message.into(),
                kind: kind.into(),
            },
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, kind) = match e.class() {
            ErrorClass::NotFound => (StatusCode::NOT_FOUND, "not_found"),
            ErrorClass::Conflict => (StatusCode::CONFLICT, "conflict"),
            ErrorClass::Invalid => (StatusCode::BAD_REQUEST, "invalid"),
            ErrorClass::Internal => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "session operation failed");
        }
        ApiError::new(status, kind, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Parses a JSON body so that every malformed request maps to 400.
fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

/// Runs a session operation off the async workers; it may touch the log.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> Result<T, SessionError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

type Shared = State<Arc<SessionManager>>;

async fn create(State(mgr): Shared, body: Bytes) -> ApiResult<impl IntoResponse> {
    let request: CreateSession = parse(&body)?;
    let snapshot = blocking(move || mgr.create_session(request).and_then(|id| mgr.get_state(&id))).await?;
    Ok((StatusCode::CREATED, Json(snapshot)))
}

async fn decide(State(mgr): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let d: DecisionBody = parse(&body)?;
    let verdict =
        blocking(move || mgr.submit_decision(&id, Pair::new(d.row, d.col), d.confidence, d.expected_index)).await?;
    Ok(Json(verdict))
}

async fn state(State(mgr): Shared, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(mgr.get_state(&id)?))
}

async fn finish(State(mgr): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let rb: RbConfig = if body.iter().all(u8::is_ascii_whitespace) {
        FinalizeBody::default().into()
    } else {
        parse::<FinalizeBody>(&body)?.into()
    };
    Ok(Json(blocking(move || mgr.finalize_session(&id, &rb)).await?))
}

async fn tasks(State(mgr): Shared) -> impl IntoResponse {
    Json(mgr.tasks())
}

async fn task(State(mgr): Shared, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(mgr.task(&id)?))
}

/// Builds the service. Without `ui_origin` any origin may call it.
pub fn router(manager: Arc<SessionManager>, ui_origin: Option<HeaderValue>) -> Router {
    let origin = match ui_origin {
        Some(o) => AllowOrigin::exact(o),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new().allow_origin(origin).allow_methods(Any).allow_headers(Any);
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(state))
        .route("/sessions/{id}/decisions", post(decide))
        .route("/sessions/{id}/finalize", post(finish))
        .route("/tasks", get(tasks))
        .route("/tasks/{id}", get(task))
        .layer(cors)
        .with_state(manager)
}

/// Serves until the listener fails.
pub async fn serve(
    listener: tokio::net::TcpListener,
    manager: Arc<SessionManager>,
    ui_origin: Option<HeaderValue>,
) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "serving matching sessions");
    }
    axum::serve(listener, router(manager, ui_origin)).await
}

/// Loads task bundles from `dir`: the directory itself when it is a bundle,
/// otherwise each bundle subdirectory, keyed by directory name.
pub fn load_tasks(dir: &Path) -> procmatch::Result<Vec<(String, TaskBundle)>> {
    let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    if dir.join("meta.json").is_file() {
        return Ok(vec![(name(dir), load_task_bundle(dir)?)]);
    }
    let mut subdirs: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| procmatch::Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("meta.json").is_file())
        .collect();
    subdirs.sort();
    subdirs.iter().map(|p| Ok((name(p), load_task_bundle(p)?))).collect()
}
