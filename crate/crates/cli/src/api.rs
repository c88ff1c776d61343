//! JSON API over a running [`Pipeline`].
//!
//! | method | path                       | body / reply                          |
//! |--------|----------------------------|---------------------------------------|
//! | GET    | /healthz                   | `{"status": "ok", "jobs": n}`         |
//! | POST   | /jobs                      | `{"input": {"audio": path}, ...}` → 202 `{"id", "state"}` |
//! | GET    | /jobs                      | list of jobs                          |
//! | GET    | /jobs/{id}                 | one job with its latest report        |
//! | GET    | /reports                   | latest version of every report        |
//! | GET    | /reports/{id}              | latest version, or `?version=n`       |
//! | GET    | /reports/{id}/versions     | full history                          |
//! | POST   | /reports/{id}/overrides    | override → new version; 409 on a stale `expected_version` |
//!
//! Errors are `{"error": "..."}` with a matching status code.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use fieldvoice_core::config::Config;
use fieldvoice_core::pipeline::{
    JobInput, JobState, Override, OverrideError, Pipeline, ReportVersion, SubmitError, VersionSource,
};

use crate::setup::{job_options, JobChoices};

#[derive(Clone)]
pub struct AppState {
    pub pipeline: Arc<Pipeline>,
    pub config: Arc<Config>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no {what} `{id}`"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, r.body_text())
    }
}

impl From<OverrideError> for ApiError {
    fn from(e: OverrideError) -> Self {
        match &e {
            OverrideError::UnknownReport(_) => ApiError::new(StatusCode::NOT_FOUND, e.to_string()),
            OverrideError::VersionConflict { expected, actual, .. } => ApiError {
                status: StatusCode::CONFLICT,
                body: json!({ "error": e.to_string(), "expected_version": expected, "current_version": actual }),
            },
            OverrideError::Invalid(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            OverrideError::Store(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs blocking pipeline work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/jobs", post(submit).get(list_jobs))
        .route("/jobs/{id}", get(get_job))
        .route("/reports", get(list_reports))
        .route("/reports/{id}", get(get_report))
        .route("/reports/{id}/versions", get(report_history))
        .route("/reports/{id}/overrides", post(post_override))
        .with_state(state)
}

async fn healthz(State(s): State<AppState>) -> Json<Value> {
    let jobs = s.pipeline.jobs().len();
    Json(json!({ "status": "ok", "jobs": jobs }))
}

#[derive(Debug, Deserialize)]
pub struct SubmitBody {
    pub input: JobInput,
    #[serde(flatten)]
    pub choices: JobChoices,
}

async fn submit(State(s): State<AppState>, body: Result<Json<SubmitBody>, JsonRejection>) -> ApiResult<Response> {
    let Json(body) = body?;
    let options = job_options(&s.config, &body.choices)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let pipeline = s.pipeline.clone();
    let id = blocking(move || pipeline.submit(body.input, options))
        .await?
        .map_err(|e| match e {
            SubmitError::MissingInput(_) | SubmitError::InvalidOptions(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
            }
            SubmitError::Store(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        })?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "id": id, "state": JobState::Queued }))).into_response())
}

async fn list_jobs(State(s): State<AppState>) -> Json<Value> {
    Json(json!(s.pipeline.jobs()))
}

async fn get_job(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let job = s.pipeline.job(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    Ok(Json(json!(job)))
}

/// One stored report version as served to clients.
#[derive(Debug, Serialize)]
pub struct ReportView {
    pub report_id: String,
    pub version: u32,
    pub created_at: String,
    pub source: VersionSource,
    pub job_state: Option<JobState>,
    pub report: Value,
}

fn view(s: &AppState, v: ReportVersion) -> ApiResult<ReportView> {
    let report = serde_json::from_str(&v.canonical).map_err(|e| {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            format!("stored report {} v{} unreadable: {e}", v.report_id, v.version),
        )
    })?;
    Ok(ReportView {
        job_state: s.pipeline.job(&v.report_id).map(|j| j.state),
        report_id: v.report_id,
        version: v.version,
        created_at: v.created_at,
        source: v.source,
        report,
    })
}

async fn list_reports(State(s): State<AppState>) -> ApiResult<Json<Vec<ReportView>>> {
    let views = s
        .pipeline
        .latest_reports()
        .into_iter()
        .map(|v| view(&s, v))
        .collect::<ApiResult<Vec<_>>>()?;
    Ok(Json(views))
}

#[derive(Debug, Deserialize)]
pub struct VersionQuery {
    pub version: Option<u32>,
}

async fn get_report(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<VersionQuery>,
) -> ApiResult<Json<ReportView>> {
    let v = match q.version {
        None => s.pipeline.latest_report(&id),
        Some(n) => s.pipeline.report_versions(&id).into_iter().find(|v| v.version == n),
    };
    let v = v.ok_or_else(|| match q.version {
        Some(n) => ApiError::not_found("report version", &format!("{id}@{n}")),
        None => ApiError::not_found("report", &id),
    })?;
    Ok(Json(view(&s, v)?))
}

async fn report_history(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Vec<ReportView>>> {
    let versions = s.pipeline.report_versions(&id);
    if versions.is_empty() {
        return Err(ApiError::not_found("report", &id));
    }
    Ok(Json(versions.into_iter().map(|v| view(&s, v)).collect::<ApiResult<_>>()?))
}

#[derive(Debug, Deserialize)]
pub struct OverrideBody {
    #[serde(flatten)]
    pub change: Override,
    #[serde(default)]
    pub actor: String,
    #[serde(default)]
    pub expected_version: Option<u32>,
}

async fn post_override(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<OverrideBody>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(body) = body?;
    let pipeline = s.pipeline.clone();
    let report_id = id.clone();
    let outcome = blocking(move || {
        pipeline.record_override(&report_id, &body.change, &body.actor, body.expected_version)
    })
    .await??;
    let changed = outcome.changed;
    let v = view(&s, outcome.version)?;
    Ok(Json(json!({ "changed": changed, "version": v.version, "report": v })))
}
