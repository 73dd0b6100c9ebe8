//! JSON-over-HTTP review service.
//!
//! There is no authentication: bind it to a local address only.
//!
//! | Method | Path | Body | Response |
//! |---|---|---|---|
//! | GET | `/runs` | | `[RunSummary]` |
//! | GET | `/runs/{id}/files` | | `RunState` |
//! | GET | `/runs/{id}/files/{path}/comparison` | | `ComparisonReport` |
//! | POST | `/runs/{id}/files/{path}/decision` | `DecisionRequest` | `RunState` |
//! | POST | `/runs/{id}/apply` | | `ApplyResponse` |
//!
//! `{path}` is the file location with `/` percent-encoded as `%2F`.
//! Errors come back as `{"error": kind, "message": text}` with status 404
//! (`not_found`), 400 (`validation`), 409 (`conflict`, `gate_blocked`) or
//! 500 (`internal`); `gate_blocked` also lists the undecided `files`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use issuefix_core::review::{ReviewDecision, ReviewStore, RunState, Verdict};
use issuefix_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub verdict: Verdict,
    #[serde(default)]
    pub edited_content: Option<String>,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApplyResponse {
    pub final_root: PathBuf,
    pub state: RunState,
}

pub enum ApiError {
    Core(Error),
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Core(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let err = match self {
            ApiError::Core(e) => e,
            ApiError::Internal(message) => {
                tracing::error!("{message}");
                let body = json!({"error": "internal", "message": message});
                return (StatusCode::INTERNAL_SERVER_ERROR, Json(body)).into_response();
            }
        };
        let message = err.to_string();
        let (status, body) = match &err {
            Error::NotFound(_) => (
                StatusCode::NOT_FOUND,
                json!({"error": "not_found", "message": message}),
            ),
            Error::Validation(_) => (
                StatusCode::BAD_REQUEST,
                json!({"error": "validation", "message": message}),
            ),
            Error::Conflict(_) => (
                StatusCode::CONFLICT,
                json!({"error": "conflict", "message": message}),
            ),
            Error::GateBlocked(files) => (
                StatusCode::CONFLICT,
                json!({"error": "gate_blocked", "message": message, "files": files}),
            ),
            _ => {
                tracing::error!("{message}");
                (
                    StatusCode::INTERNAL_SERVER_ERROR,
                    json!({"error": "internal", "message": message}),
                )
            }
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Runs a store call off the async workers.
async fn blocking<T, F>(store: Arc<ReviewStore>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&ReviewStore) -> issuefix_core::Result<T> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError::Internal(format!("task failed: {e}")))?
        .map(Json)
        .map_err(ApiError::Core)
}

async fn list_runs(State(store): State<Arc<ReviewStore>>) -> Response {
    blocking(store, |s| s.list_runs()).await.into_response()
}

async fn list_files(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> Response {
    blocking(store, move |s| s.state(&id)).await.into_response()
}

async fn comparison(
    State(store): State<Arc<ReviewStore>>,
    Path((id, path)): Path<(String, String)>,
) -> Response {
    blocking(store, move |s| s.comparison(&id, &path))
        .await
        .into_response()
}

async fn decision(
    State(store): State<Arc<ReviewStore>>,
    Path((id, path)): Path<(String, String)>,
    body: Result<Json<DecisionRequest>, axum::extract::rejection::JsonRejection>,
) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return ApiError::Core(Error::Validation(e.body_text())).into_response(),
    };
    blocking(store, move |s| {
        let decision = ReviewDecision::new(&path, req.verdict, req.edited_content, req.note)?;
        s.record_decision(&id, decision)
    })
    .await
    .into_response()
}

async fn apply(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> Response {
    blocking(store, move |s| {
        let final_root = s.apply_run(&id)?;
        Ok(ApplyResponse {
            final_root,
            state: s.state(&id)?,
        })
    })
    .await
    .into_response()
}

/// API routes, plus static UI assets under `/` when `ui_dir` is given.
pub fn router(store: Arc<ReviewStore>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/runs", get(list_runs))
        .route("/runs/{id}/files", get(list_files))
        .route("/runs/{id}/files/{path}/comparison", get(comparison))
        .route("/runs/{id}/files/{path}/decision", post(decision))
        .route("/runs/{id}/apply", post(apply))
        .with_state(store);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until Ctrl-C.
pub async fn serve(
    addr: SocketAddr,
    store: Arc<ReviewStore>,
    ui_dir: Option<PathBuf>,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "review service listening (no authentication)");
    axum::serve(listener, router(store, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
