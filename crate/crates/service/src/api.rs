use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::trace::TraceLayer;

use crate::diagnose::{DiagnoseError, DiagnosisResult, Diagnoser};
use crate::report::{build_report, render_json, render_markdown};
use crate::store::{NewChild, Store, StoreError};

#[derive(Clone)]
pub struct AppState {
    pub diagnoser: Arc<Diagnoser>,
    pub store: Arc<Store>,
    /// Accepted bearer tokens; empty means no authentication.
    pub tokens: Arc<Vec<String>>,
    pub max_upload_bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    error: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<&'static str>,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            error,
            reason: None,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let (status, code) = match &e {
            StoreError::Invalid(_) => (StatusCode::BAD_REQUEST, "invalid_field"),
            StoreError::Duplicate(_) => (StatusCode::CONFLICT, "duplicate_child"),
            StoreError::UnknownChild(_) => (StatusCode::NOT_FOUND, "unknown_child"),
            StoreError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<DiagnoseError> for ApiError {
    fn from(e: DiagnoseError) -> Self {
        let (status, code) = match &e {
            DiagnoseError::UnknownLetter(_) => (StatusCode::NOT_FOUND, "unknown_letter"),
            DiagnoseError::BadAudio(_) => (StatusCode::BAD_REQUEST, "bad_audio"),
            DiagnoseError::Silence | DiagnoseError::TooShort => (StatusCode::UNPROCESSABLE_ENTITY, "unusable_recording"),
            DiagnoseError::TooLong { .. } => (StatusCode::PAYLOAD_TOO_LARGE, "too_long"),
            DiagnoseError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError {
            status,
            error: code,
            reason: Some(e.reason()),
            message: e.to_string(),
        }
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if state.tokens.is_empty() {
        return next.run(req).await;
    }
    let ok = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|t| state.tokens.iter().any(|k| k == t));
    if ok {
        next.run(req).await
    } else {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid bearer token").into_response()
    }
}

async fn create_child(State(state): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let new: NewChild = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let store = state.store.clone();
    let profile = blocking(move || store.register(new)).await??;
    Ok((StatusCode::CREATED, Json(profile)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DiagnoseResponse {
    #[serde(flatten)]
    pub result: DiagnosisResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub child_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<u64>,
}

async fn diagnose(State(state): State<AppState>, mut form: Multipart) -> Result<Json<DiagnoseResponse>, ApiError> {
    let multipart_err = |e: axum::extract::multipart::MultipartError| {
        let status = e.status();
        let code = if status == StatusCode::PAYLOAD_TOO_LARGE {
            "too_large"
        } else {
            "bad_request"
        };
        ApiError::new(status, code, e.body_text())
    };
    let (mut audio, mut letter, mut child_id) = (None, None, None);
    while let Some(field) = form.next_field().await.map_err(multipart_err)? {
        match field.name() {
            Some("audio") => audio = Some(field.bytes().await.map_err(multipart_err)?),
            Some("letter_id") => letter = Some(field.text().await.map_err(multipart_err)?),
            Some("child_id") => {
                let id = field.text().await.map_err(multipart_err)?;
                if !id.trim().is_empty() {
                    child_id = Some(id.trim().to_string());
                }
            }
            _ => {}
        }
    }
    let audio = audio.ok_or_else(|| ApiError::bad_request("missing multipart field \"audio\""))?;
    let letter = letter.ok_or_else(|| ApiError::bad_request("missing multipart field \"letter_id\""))?;
    if let Some(id) = &child_id {
        if !state.store.contains(id) {
            return Err(StoreError::UnknownChild(id.clone()).into());
        }
    }
    let diagnoser = state.diagnoser.clone();
    let result = blocking(move || diagnoser.diagnose_bytes(&audio, letter.trim())).await??;
    let mut level = None;
    if let Some(id) = child_id.clone() {
        let store = state.store.clone();
        let (letter, label, score) = (result.letter_id.clone(), result.label, result.score);
        let rec = blocking(move || store.record_attempt(&id, &letter, label, score)).await??;
        level = Some(rec.level);
    }
    Ok(Json(DiagnoseResponse {
        result,
        child_id,
        level,
    }))
}

async fn progress(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    state
        .store
        .progress(&id)
        .map(Json)
        .ok_or_else(|| StoreError::UnknownChild(id).into())
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    format: Option<String>,
}

async fn report(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ReportQuery>,
) -> Result<Response, ApiError> {
    let (Some(child), Some(progress)) = (state.store.profile(&id), state.store.progress(&id)) else {
        return Err(StoreError::UnknownChild(id).into());
    };
    let report = build_report(&child, &progress);
    let (body, content_type) = match q.format.as_deref().unwrap_or("json") {
        "json" => (render_json(&report), "application/json"),
        "markdown" | "md" => (render_markdown(&report), "text/markdown; charset=utf-8"),
        other => return Err(ApiError::bad_request(format!("unknown report format {other:?}"))),
    };
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static(content_type))], body).into_response())
}

async fn letters(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.diagnoser.registry().letters())
}

async fn health() -> impl IntoResponse {
    Json(serde_json::json!({ "status": "ok" }))
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/children", post(create_child))
        .route("/children/{id}/progress", get(progress))
        .route("/children/{id}/report", get(report))
        .route("/diagnose", post(diagnose))
        .route("/letters", get(letters))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token))
        .route("/health", get(health));
    Router::new()
        .nest("/api/v1", api)
        .layer(DefaultBodyLimit::max(state.max_upload_bytes))
        .layer(CorsLayer::permissive())
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}
