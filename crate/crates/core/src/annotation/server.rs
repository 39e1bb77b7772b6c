//! REST front of an [`AnnotationStore`], plus a static mount for the
//! annotation UI bundle.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use super::{AnnotationError, AnnotationStore, Labels, GUIDELINES};

pub type SharedStore = Arc<Mutex<AnnotationStore>>;

impl IntoResponse for AnnotationError {
    fn into_response(self) -> Response {
        let status = match &self {
            AnnotationError::UnknownAnnotator(_) | AnnotationError::UnknownTask(_) => StatusCode::NOT_FOUND,
            AnnotationError::Conflict { .. } | AnnotationError::PanelFull(_) => StatusCode::CONFLICT,
            AnnotationError::InvalidLabel { .. } | AnnotationError::Argument(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

fn lock(store: &SharedStore) -> std::sync::MutexGuard<'_, AnnotationStore> {
    store.lock().unwrap_or_else(|e| e.into_inner())
}

#[derive(Deserialize)]
struct Register {
    id: String,
}

async fn register(State(store): State<SharedStore>, Json(body): Json<Register>) -> Result<Response, AnnotationError> {
    let created = lock(&store).register(&body.id)?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(json!({ "id": body.id }))).into_response())
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
}

async fn next_task(State(store): State<SharedStore>, Query(q): Query<NextQuery>) -> Result<Response, AnnotationError> {
    let store = lock(&store);
    Ok(match store.next_task(&q.annotator)? {
        Some(task) => Json(task).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

#[derive(Deserialize)]
struct Submission {
    annotator: String,
    #[serde(flatten)]
    labels: Labels,
}

async fn submit(
    State(store): State<SharedStore>,
    Path(task_id): Path<String>,
    Json(body): Json<Submission>,
) -> Result<Response, AnnotationError> {
    let outcome = lock(&store).submit(&body.annotator, &task_id, body.labels)?;
    let decided = outcome.decision.map(|j| j.contradiction);
    Ok(Json(json!({ "task_id": task_id, "decided": decided.is_some(), "contradiction": decided })).into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    kind: String,
}

async fn export(State(store): State<SharedStore>, Query(q): Query<ExportQuery>) -> Result<Response, AnnotationError> {
    let body = {
        let store = lock(&store);
        match q.kind.as_str() {
            "decisions" => store.export_decisions(),
            "raw" => store.export_raw(),
            other => return Err(AnnotationError::Argument(format!("unknown export kind `{other}`"))),
        }
    };
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn progress(State(store): State<SharedStore>) -> Response {
    Json(lock(&store).progress()).into_response()
}

async fn guidelines() -> &'static str {
    GUIDELINES
}

/// API routes under `/api`; when `static_dir` is given, every other path is
/// served from it.
pub fn router(store: SharedStore, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/annotators", post(register))
        .route("/api/tasks/next", get(next_task))
        .route("/api/tasks/{task_id}/submit", post(submit))
        .route("/api/export", get(export))
        .route("/api/progress", get(progress))
        .route("/api/guidelines", get(guidelines))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until the process receives Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
