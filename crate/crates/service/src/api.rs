//! HTTP/JSON routes under `/api/v1`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use nlpre_core::analytics::AveragingOrder;
use nlpre_core::eval::MetricId;
use serde::Serialize;
use serde_json::json;

use crate::error::ServiceError;
use crate::leaderboard::{LeaderboardQuery, SortOrder};
use crate::service::{AnalyticsQuery, BenchmarkService};
use crate::worker::WorkerPool;

/// Room for multipart framing around the archive itself.
const MULTIPART_OVERHEAD: usize = 64 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<BenchmarkService>,
    pub pool: WorkerPool,
}

pub fn router(state: AppState) -> Router {
    let body_limit = state.service.config().config.upload_limit_bytes as usize + MULTIPART_OVERHEAD;
    Router::new()
        .route("/api/v1/config", get(get_config))
        .route("/api/v1/submissions", post(create_submission))
        .route("/api/v1/submissions/:id", get(get_submission))
        .route("/api/v1/submissions/:id/publish", post(publish))
        .route("/api/v1/leaderboard", get(leaderboard))
        .route("/api/v1/pages/:slug", get(page))
        .route("/api/v1/analytics/correlation", get(correlation))
        .route("/api/v1/analytics/dispersion", get(dispersion))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::TooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            ServiceError::NotAZip | ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::DuplicateArchive { .. } | ServiceError::WrongState { .. } => StatusCode::CONFLICT,
            ServiceError::WrongToken
            | ServiceError::UnknownTagset(_)
            | ServiceError::UnknownDataset(_)
            | ServiceError::UnknownPage(_) => StatusCode::NOT_FOUND,
            ServiceError::Engine(_) | ServiceError::Analytics(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Config(_) | ServiceError::Store(_) | ServiceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let message = if status == StatusCode::INTERNAL_SERVER_ERROR {
            // Details can name server paths; they go to the log only.
            tracing::error!(error = %self, "internal error");
            "internal error".to_string()
        } else {
            self.to_string()
        };
        let mut body = json!({ "error": { "code": self.code(), "message": message } });
        if let ServiceError::DuplicateArchive { existing_id } = &self {
            body["error"]["existing_id"] = json!(existing_id);
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ServiceError>;

/// Runs a store-bound call off the async executor.
async fn blocking<T, F>(state: &AppState, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&BenchmarkService) -> Result<T, ServiceError> + Send + 'static,
{
    let service = state.service.clone();
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e.to_string())))?
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    let value = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let token = value.strip_prefix("Bearer ").or_else(|| value.strip_prefix("bearer "))?;
    Some(token.trim().to_string())
}

async fn get_config(State(state): State<AppState>) -> Json<crate::config::PublicConfig> {
    Json(state.service.public_config())
}

async fn create_submission(
    State(state): State<AppState>,
    mut multipart: Multipart,
) -> Result<(StatusCode, Json<crate::model::Receipt>), ServiceError> {
    let limit = state.service.config().config.upload_limit_bytes;
    let too_large = |status: StatusCode| {
        if status == StatusCode::PAYLOAD_TOO_LARGE {
            ServiceError::TooLarge { limit }
        } else {
            ServiceError::BadRequest("malformed multipart body".into())
        }
    };
    let mut archive = None;
    while let Some(field) = multipart.next_field().await.map_err(|e| too_large(e.status()))? {
        if field.name() == Some("archive") {
            archive = Some(field.bytes().await.map_err(|e| too_large(e.status()))?);
        }
    }
    let bytes = archive.ok_or_else(|| ServiceError::BadRequest("multipart field 'archive' is required".into()))?;
    let receipt = blocking(&state, move |s| s.create_submission(&bytes)).await?;
    state.pool.enqueue(receipt.id.clone());
    Ok((StatusCode::ACCEPTED, Json(receipt)))
}

async fn get_submission(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<crate::service::SubmissionView> {
    let token = bearer(&headers);
    blocking(&state, move |s| s.get_submission(&id, token.as_deref())).await.map(Json)
}

async fn publish(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<crate::leaderboard::LeaderboardEntry> {
    let token = bearer(&headers).ok_or(ServiceError::WrongToken)?;
    blocking(&state, move |s| s.publish(&id, &token)).await.map(Json)
}

#[derive(Serialize)]
struct LeaderboardResponse {
    tagset: String,
    dataset: Option<String>,
    metric: Option<MetricId>,
    sort: SortOrder,
    entries: Vec<crate::leaderboard::LeaderboardEntry>,
}

fn nonempty(params: &HashMap<String, String>, key: &str) -> Option<String> {
    params.get(key).map(|v| v.trim().to_string()).filter(|v| !v.is_empty())
}

fn list(params: &HashMap<String, String>, key: &str) -> Vec<String> {
    nonempty(params, key)
        .map(|v| v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect())
        .unwrap_or_default()
}

async fn leaderboard(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult<LeaderboardResponse> {
    let tagset = nonempty(&params, "tagset").ok_or_else(|| ServiceError::BadRequest("tagset is required".into()))?;
    let metric = nonempty(&params, "metric")
        .map(|m| m.parse::<MetricId>())
        .transpose()
        .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    let sort = nonempty(&params, "sort")
        .map(|s| s.parse::<SortOrder>())
        .transpose()
        .map_err(ServiceError::BadRequest)?
        .unwrap_or_default();
    let query = LeaderboardQuery {
        tagset,
        dataset: nonempty(&params, "dataset"),
        metric,
        sort,
    };
    blocking(&state, move |s| {
        let entries = s.leaderboard(&query)?;
        Ok(LeaderboardResponse {
            tagset: query.tagset,
            dataset: query.dataset,
            metric: query.metric,
            sort: query.sort,
            entries,
        })
    })
    .await
    .map(Json)
}

async fn page(State(state): State<AppState>, Path(slug): Path<String>) -> ApiResult<serde_json::Value> {
    let markdown = blocking(&state, {
        let slug = slug.clone();
        move |s| s.page(&slug)
    })
    .await?;
    Ok(Json(json!({ "slug": slug, "markdown": markdown })))
}

fn analytics_query(params: &HashMap<String, String>) -> Result<AnalyticsQuery, ServiceError> {
    let metrics = list(params, "metrics")
        .iter()
        .map(|m| m.parse::<MetricId>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    let order = match nonempty(params, "order").as_deref() {
        None | Some("datasets_first") => AveragingOrder::DatasetsFirst,
        Some("embeddings_first") => AveragingOrder::EmbeddingsFirst,
        Some(other) => {
            return Err(ServiceError::BadRequest(format!(
                "order must be datasets_first or embeddings_first, got '{other}'"
            )))
        }
    };
    let by_embedding = match nonempty(params, "by_embedding").as_deref() {
        None | Some("false") | Some("0") => false,
        Some("true") | Some("1") => true,
        Some(other) => return Err(ServiceError::BadRequest(format!("by_embedding must be a boolean, got '{other}'"))),
    };
    let datasets = list(params, "datasets");
    Ok(AnalyticsQuery {
        tagsets: list(params, "tagsets"),
        metrics,
        datasets: (!datasets.is_empty()).then_some(datasets),
        order,
        by_embedding,
    })
}

async fn correlation(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult<crate::service::CorrelationResponse> {
    let query = analytics_query(&params)?;
    blocking(&state, move |s| s.correlation(&query)).await.map(Json)
}

async fn dispersion(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult<crate::service::DispersionResponse> {
    let query = analytics_query(&params)?;
    blocking(&state, move |s| s.dispersion(&query)).await.map(Json)
}
