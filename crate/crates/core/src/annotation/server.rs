//! JSON-over-HTTP front end for an [`AnnotationStore`].
//!
//! Routes:
//! - `GET  /api/items/next?annotator=A&limit=N`
//! - `POST /api/labels`      `{item_id, annotator, tag, overwrite?}`
//! - `GET  /api/progress`
//! - `GET  /api/disagreements`
//! - `POST /api/adjudicate`  `{item_id, tag, adjudicator}`
//!
//! Failures answer with a 4xx status and `{"error": code, "detail": text}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{AnnotationError, AnnotationStore};
use crate::corpus::Tag;

pub type SharedStore = Arc<RwLock<AnnotationStore>>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: String,
}

impl ApiError {
    fn bad_request(code: &'static str, detail: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code,
            detail: detail.into(),
        }
    }
}

impl From<AnnotationError> for ApiError {
    fn from(err: AnnotationError) -> Self {
        let status = match &err {
            AnnotationError::UnknownItem(_) => StatusCode::NOT_FOUND,
            AnnotationError::DuplicateVote { .. }
            | AnnotationError::ItemNotInAdjudication(_)
            | AnnotationError::ItemClosed(_) => StatusCode::CONFLICT,
            AnnotationError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError {
            status,
            code: err.code(),
            detail: err.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({"error": self.code, "detail": self.detail})),
        )
            .into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("bad_request", e.to_string()))
}

fn parse_tag(raw: &str) -> Result<Tag, ApiError> {
    raw.parse()
        .map_err(|e: crate::corpus::ParseTagError| ApiError::bad_request("unknown_tag", e.to_string()))
}

fn to_json<T: serde::Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("response serializes")
}

fn read(store: &SharedStore) -> std::sync::RwLockReadGuard<'_, AnnotationStore> {
    store.read().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn write(store: &SharedStore) -> std::sync::RwLockWriteGuard<'_, AnnotationStore> {
    store.write().unwrap_or_else(|poisoned| poisoned.into_inner())
}

async fn next_items(
    State(store): State<SharedStore>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult {
    let annotator = params
        .get("annotator")
        .ok_or_else(|| ApiError::bad_request("bad_request", "missing `annotator` parameter"))?;
    let limit = match params.get("limit") {
        None => 20,
        Some(raw) => raw
            .parse::<usize>()
            .map_err(|_| ApiError::bad_request("bad_request", format!("invalid limit `{raw}`")))?,
    };
    let items = read(&store).next_batch(annotator, limit)?;
    Ok(Json(to_json(&items)))
}

#[derive(Deserialize)]
struct LabelRequest {
    item_id: String,
    annotator: String,
    tag: String,
    #[serde(default)]
    overwrite: bool,
}

async fn post_label(State(store): State<SharedStore>, body: Bytes) -> ApiResult {
    let request: LabelRequest = parse_body(&body)?;
    let tag = parse_tag(&request.tag)?;
    let decision = write(&store).record_label(
        &request.item_id,
        &request.annotator,
        tag,
        request.overwrite,
    )?;
    Ok(Json(to_json(&decision)))
}

async fn progress(State(store): State<SharedStore>) -> ApiResult {
    Ok(Json(read(&store).progress().to_json()))
}

async fn disagreements(State(store): State<SharedStore>) -> ApiResult {
    Ok(Json(to_json(&read(&store).disagreements())))
}

#[derive(Deserialize)]
struct AdjudicateRequest {
    item_id: String,
    tag: String,
    adjudicator: String,
}

async fn post_adjudicate(State(store): State<SharedStore>, body: Bytes) -> ApiResult {
    let request: AdjudicateRequest = parse_body(&body)?;
    let tag = parse_tag(&request.tag)?;
    let decision = write(&store).adjudicate(&request.item_id, tag, &request.adjudicator)?;
    Ok(Json(to_json(&decision)))
}

async fn not_found() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        code: "not_found",
        detail: "no such route".into(),
    }
}

pub fn router(store: SharedStore) -> Router {
    Router::new()
        .route("/api/items/next", get(next_items))
        .route("/api/labels", post(post_label))
        .route("/api/progress", get(progress))
        .route("/api/disagreements", get(disagreements))
        .route("/api/adjudicate", post(post_adjudicate))
        .fallback(not_found)
        .with_state(store)
}

/// Binds `addr` and serves until `shutdown` resolves. `on_bound` receives
/// the actual local address (useful with port 0).
pub async fn serve(
    store: SharedStore,
    addr: SocketAddr,
    on_bound: impl FnOnce(SocketAddr),
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(shutdown)
        .await
}
