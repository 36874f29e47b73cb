use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use crate::error::ServiceError;
use crate::service::Service;
use crate::types::{CreateProject, OpenRound, Submission};

/// Error response: `{"error": {"code", "detail", ...}}`. Rejections add a
/// `violations` array and incomplete rounds a `pending` item list.
#[derive(Debug)]
pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(ServiceError::Invalid(e.body_text()))
    }
}

fn status_of(e: &ServiceError) -> StatusCode {
    match e {
        ServiceError::Invalid(_) | ServiceError::Rejected(_) | ServiceError::Ingest(_) => {
            StatusCode::BAD_REQUEST
        }
        ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
        ServiceError::ProjectExists(_)
        | ServiceError::RoundSequence { .. }
        | ServiceError::RoundIncomplete { .. }
        | ServiceError::AlreadySubmitted(_) => StatusCode::CONFLICT,
        ServiceError::Io(_) | ServiceError::Replay { .. } => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = self.0;
        let status = status_of(&e);
        if status.is_server_error() {
            log::error!("{e}");
        }
        let mut body = json!({ "code": e.code(), "detail": e.to_string() });
        match &e {
            ServiceError::Rejected(v) => body["violations"] = json!(v),
            ServiceError::RoundIncomplete { pending, .. } => body["pending"] = json!(pending),
            _ => {}
        }
        (status, Json(json!({ "error": body }))).into_response()
    }
}

type Api<T> = Result<T, ApiError>;
type Shared = State<Arc<Service>>;

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn create_project(
    State(svc): Shared,
    body: Result<Json<CreateProject>, JsonRejection>,
) -> Api<Response> {
    let Json(req) = body?;
    let project = svc.create_project(req)?;
    Ok((StatusCode::CREATED, Json(project)).into_response())
}

async fn list_projects(State(svc): Shared) -> Json<Value> {
    Json(json!({ "projects": svc.projects() }))
}

async fn get_project(State(svc): Shared, Path(id): Path<String>) -> Api<Response> {
    Ok(Json(svc.project(&id)?).into_response())
}

async fn open_round(
    State(svc): Shared,
    Path(id): Path<String>,
    body: Result<Json<OpenRound>, JsonRejection>,
) -> Api<Response> {
    let Json(req) = body?;
    let assignments = svc.open_round(&id, req.round_no)?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "round_no": req.round_no, "assignments": assignments })),
    )
        .into_response())
}

async fn next_task(
    State(svc): Shared,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Api<Response> {
    let annotator = q
        .get("annotator")
        .filter(|a| !a.is_empty())
        .ok_or_else(|| ServiceError::Invalid("query parameter annotator is required".into()))?;
    Ok(Json(svc.next_task(&id, annotator)?).into_response())
}

async fn submit(
    State(svc): Shared,
    Path(id): Path<String>,
    body: Result<Json<Submission>, JsonRejection>,
) -> Api<Response> {
    let Json(sub) = body?;
    Ok(Json(svc.submit(&id, sub)?).into_response())
}

async fn stats(State(svc): Shared, Path(id): Path<String>) -> Api<Response> {
    let rounds = svc.stats(&id)?;
    Ok(Json(json!({ "project_id": id, "rounds": rounds })).into_response())
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/rounds", post(open_round))
        .route("/projects/{id}/tasks/next", get(next_task))
        .route("/projects/{id}/stats", get(stats))
        .route("/assignments/{id}/submit", post(submit))
        .with_state(service)
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: Arc<Service>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        log::info!("annotation service listening on http://{addr}");
    }
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Bind `addr` and serve in a background task, returning the bound address.
/// Useful with port 0 for tests and embedded use.
pub async fn spawn(
    addr: std::net::SocketAddr,
    service: Arc<Service>,
) -> std::io::Result<(
    std::net::SocketAddr,
    tokio::task::JoinHandle<std::io::Result<()>>,
)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let bound = listener.local_addr()?;
    let handle = tokio::spawn(async move { axum::serve(listener, router(service)).await });
    Ok((bound, handle))
}
