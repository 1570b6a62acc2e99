//! HTTP API.
//!
//! | method | path                                   | success          |
//! |--------|----------------------------------------|------------------|
//! | POST   | /api/v1/sessions                       | 201 `{session_id}` |
//! | GET    | /api/v1/sessions/{id}                  | 200 manifest     |
//! | PUT    | /api/v1/sessions/{id}/tasks/{task}     | 204              |
//! | POST   | /api/v1/sessions/{id}/analyze          | 200 report       |
//! | GET    | /api/v1/sessions/{id}/report           | 200 report       |
//! | GET    | /healthz                               | 200              |
//!
//! Errors are `{"error": <code>, "detail": <text>}`.

use std::sync::Arc;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use park_core::{ingest, SessionId, TaskKind};
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::timeout::TimeoutLayer;
use tower_http::trace::TraceLayer;

use crate::pipeline::{AnalyzeError, Analyzer};
use crate::store::{SessionStore, StoreError};

pub struct AppState {
    pub store: SessionStore,
    pub analyzer: Analyzer,
    pub max_upload_bytes: usize,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, detail: impl ToString) -> Self {
        ApiError { status, code, detail: detail.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, detail = %self.detail, "request failed");
        }
        (self.status, Json(json!({ "error": self.code, "detail": self.detail }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Unavailable(_) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "store_unavailable", e),
            StoreError::UnknownSession(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_session", e),
            StoreError::Closed(_) => ApiError::new(StatusCode::CONFLICT, "session_closed", e),
            StoreError::Corrupt(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "corrupt_session", e),
        }
    }
}

impl From<AnalyzeError> for ApiError {
    fn from(e: AnalyzeError) -> Self {
        match e {
            AnalyzeError::Store(s) => s.into(),
            AnalyzeError::NotReady => ApiError::new(StatusCode::CONFLICT, "not_ready", e),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn session_id(raw: &str) -> ApiResult<SessionId> {
    SessionId::parse(raw)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("unknown session {raw:?}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))?
}

fn json_bytes(status: StatusCode, bytes: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], bytes).into_response()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    participant: Option<String>,
    region_code: Option<String>,
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e))?
    };
    let m = blocking(move || Ok(app.store.create(req.participant, req.region_code, chrono::Utc::now())?)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": m.session_id })) ).into_response())
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = session_id(&id)?;
    let m = blocking(move || Ok(app.store.manifest(&id)?)).await?;
    Ok(Json(m).into_response())
}

async fn put_task(
    State(app): State<Arc<AppState>>,
    Path((id, task)): Path<(String, String)>,
    body: Body,
) -> ApiResult<StatusCode> {
    let task: TaskKind =
        task.parse().map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_task", e))?;
    let id = session_id(&id)?;
    let limit = app.max_upload_bytes;
    let bytes = axum::body::to_bytes(body, limit).await.map_err(|_| {
        ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "payload_too_large", format!("upload exceeds {limit} bytes"))
    })?;
    blocking(move || {
        // 404 before 422: an unknown session wins over a bad payload
        app.store.manifest(&id)?;
        ingest::validate_artifact(task, &bytes)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_artifact", e))?;
        app.store.put_artifact(&id, task, &bytes, chrono::Utc::now())?;
        Ok(())
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn analyze(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = session_id(&id)?;
    let bytes = blocking(move || Ok(app.store.analyze(&id, &app.analyzer)?)).await?;
    Ok(json_bytes(StatusCode::OK, bytes))
}

async fn get_report(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = session_id(&id)?;
    let report = blocking(move || Ok(app.store.report(&id)?)).await?;
    match report {
        Some(bytes) => Ok(json_bytes(StatusCode::OK, bytes)),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "not_analyzed", "session has not been analyzed")),
    }
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

pub struct RouterOptions {
    pub request_timeout: Duration,
    pub cors_origins: Vec<String>,
}

pub fn router(state: Arc<AppState>, opts: &RouterOptions) -> Router {
    let origins: Vec<HeaderValue> = opts.cors_origins.iter().filter_map(|o| o.parse().ok()).collect();
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::list(origins))
        .allow_methods([axum::http::Method::GET, axum::http::Method::POST, axum::http::Method::PUT])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/v1/sessions", post(create_session))
        .route("/api/v1/sessions/{id}", get(get_session))
        .route("/api/v1/sessions/{id}/tasks/{task}", put(put_task).layer(DefaultBodyLimit::disable()))
        .route("/api/v1/sessions/{id}/analyze", post(analyze))
        .route("/api/v1/sessions/{id}/report", get(get_report))
        .with_state(state)
        .layer(TimeoutLayer::with_status_code(StatusCode::REQUEST_TIMEOUT, opts.request_timeout))
        .layer(cors)
        .layer(TraceLayer::new_for_http())
}
