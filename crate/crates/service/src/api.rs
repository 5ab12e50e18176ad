//! JSON-over-HTTP routes.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;

use crate::service::{CreateSession, Service, ServiceError, SubmitResult};

pub struct ApiError(StatusCode, String);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Expired(_) => StatusCode::GONE,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "request failed");
        }
        ApiError(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(StatusCode::BAD_REQUEST, e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Session calls can fit a GP, so they run off the async workers.
async fn blocking<T, F>(svc: Arc<Service>, f: F) -> ApiResult<T>
where
    T: Serialize + Send + 'static,
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map(Json)
        .map_err(ApiError::from)
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/session", post(create_session))
        .route("/api/session/{id}/result", post(submit_result))
        .route("/api/session/{id}/model", get(model))
        .with_state(svc)
}

async fn healthz(State(svc): State<Arc<Service>>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "sessions": svc.session_count() }))
}

async fn create_session(
    State(svc): State<Arc<Service>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<crate::service::Serve> {
    let Json(req) = body?;
    blocking(svc, move |s| s.create_session(req)).await
}

async fn submit_result(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Result<Json<SubmitResult>, JsonRejection>,
) -> ApiResult<crate::service::Submitted> {
    let Json(req) = body?;
    blocking(svc, move |s| s.submit_result(&id, req)).await
}

async fn model(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> ApiResult<crate::service::ModelResponse> {
    blocking(svc, move |s| s.model(&id)).await
}
