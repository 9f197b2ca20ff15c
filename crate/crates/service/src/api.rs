//! HTTP routes for dataset upload, evaluations and federated runs.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use readiness_core::engine::EngineError;
use readiness_core::federated::wire::{Envelope, Message};
use readiness_core::federated::{ClientSummary, Coordinator, SessionError};
use readiness_core::quality::summary_stats;
use readiness_core::report::{canonical_json, render_html, render_json};
use readiness_core::{inspect, schema_fingerprint, DatasetError, EvalConfig};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{info, warn};

use crate::store::{load_dataset, new_id, EvalState, EvaluationRecord, Store, StoreError};

pub const DEFAULT_BODY_LIMIT: usize = 50 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub coordinator: Arc<Coordinator>,
    /// Forces small-bin suppression on every federated run created here.
    pub suppress_small_bins: bool,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        AppState {
            store: Arc::new(store),
            coordinator: Arc::new(Coordinator::new()),
            suppress_small_bins: suppress_from_env(),
        }
    }
}

/// True when `REID_SUPPRESS_SMALL_BINS=1`.
pub fn suppress_from_env() -> bool {
    std::env::var("REID_SUPPRESS_SMALL_BINS").is_ok_and(|v| v.trim() == "1")
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    row: Option<usize>,
    column: Option<usize>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            row: None,
            column: None,
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NOT_FOUND", format!("unknown {what} `{id}`"))
    }

    fn bad_upload(e: DatasetError) -> Self {
        let mut err = Self::new(StatusCode::BAD_REQUEST, "INVALID_DATASET", e.to_string());
        if let DatasetError::MalformedCsv { row, column, .. } = e {
            err.row = Some(row);
            err.column = column;
        }
        err
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code, "message": self.message });
        if let Some(r) = self.row {
            body["row"] = json!(r);
        }
        if let Some(c) = self.column {
            body["column"] = json!(c);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        warn!(error = %e, "storage failure");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "STORAGE", e.to_string())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::SchemaMismatch { .. } => ApiError::new(StatusCode::CONFLICT, "SCHEMA_MISMATCH", e.to_string()),
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_CONFIG", e.to_string()),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::UnknownRun(_) => StatusCode::NOT_FOUND,
            SessionError::UnknownClient(_) => StatusCode::FORBIDDEN,
            SessionError::WrongRun { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Merge(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::DuplicateRun(_)
            | SessionError::LateSubmission(_)
            | SessionError::SchemaMismatch { .. }
            | SessionError::NotClosed(_) => StatusCode::CONFLICT,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn bytes_response(content_type: &'static str, body: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, content_type)], body).into_response()
}

fn html(body: Vec<u8>) -> Response {
    bytes_response("text/html; charset=utf-8", body)
}

fn json_bytes(body: Vec<u8>) -> Response {
    bytes_response("application/json", body)
}

pub fn router(state: AppState) -> Router {
    router_with_limit(state, DEFAULT_BODY_LIMIT)
}

pub fn router_with_limit(state: AppState, body_limit: usize) -> Router {
    Router::new()
        .route("/api/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/api/datasets", post(upload_dataset).get(list_datasets))
        .route("/api/datasets/{id}", get(get_dataset))
        .route("/api/datasets/{id}/summary", get(dataset_summary))
        .route("/api/evaluations", post(create_evaluation).get(list_evaluations))
        .route("/api/evaluations/{id}", get(get_evaluation))
        .route("/api/evaluations/{id}/report.json", get(evaluation_json))
        .route("/api/evaluations/{id}/report.html", get(evaluation_html))
        .route("/fed/runs", post(create_run).get(list_runs))
        .route("/fed/runs/{id}/hello", post(hello))
        .route("/fed/runs/{id}/summaries", post(submit_summary))
        .route("/fed/runs/{id}/close", post(close_run))
        .route("/fed/runs/{id}/report", get(run_report))
        .route("/fed/runs/{id}/report.html", get(run_report_html))
        .route("/fed/frames", post(frame))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

/// Closes federated runs whose deadline has passed, once a second.
pub fn spawn_deadline_ticker(coordinator: Arc<Coordinator>) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut every = tokio::time::interval(Duration::from_secs(1));
        loop {
            every.tick().await;
            for run in coordinator.run_ids() {
                // `report` applies the deadline as a side effect
                let _ = coordinator.report(&run, Utc::now());
            }
        }
    })
}

async fn upload_dataset(State(st): State<AppState>, mut form: Multipart) -> ApiResult<Response> {
    let mut file: Option<(String, Bytes)> = None;
    let mut descriptor: Option<String> = None;
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::new(e.status(), "INVALID_UPLOAD", e.body_text()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let file_name = field.file_name().map(str::to_string);
        let data = field
            .bytes()
            .await
            .map_err(|e| ApiError::new(e.status(), "INVALID_UPLOAD", e.body_text()))?;
        match name.as_str() {
            "file" => file = Some((file_name.unwrap_or_else(|| "upload.csv".into()), data)),
            "descriptor" => {
                descriptor = Some(String::from_utf8(data.to_vec()).map_err(|_| {
                    ApiError::new(StatusCode::BAD_REQUEST, "INVALID_DESCRIPTOR", "descriptor is not UTF-8")
                })?)
            }
            _ => {}
        }
    }
    let (name, bytes) =
        file.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "INVALID_UPLOAD", "missing `file` part"))?;
    let (d, warnings) = tokio::task::spawn_blocking({
        let (bytes, name, descriptor) = (bytes.clone(), name.clone(), descriptor.clone());
        move || load_dataset(&bytes, &name, descriptor.as_deref())
    })
    .await
    .expect("parse task")
    .map_err(ApiError::bad_upload)?;
    let stored = st.store.add_dataset(&bytes, d, descriptor.as_deref())?;
    info!(dataset = %stored.id, rows = stored.dataset.row_count(), "dataset uploaded");
    let mut body = serde_json::to_value(stored.info()).expect("info serializes");
    body["descriptor_warnings"] = json!(warnings);
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn list_datasets(State(st): State<AppState>) -> Json<Value> {
    Json(json!(st.store.datasets()))
}

async fn get_dataset(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let d = st.store.dataset(&id).ok_or_else(|| ApiError::not_found("dataset", &id))?;
    Ok(Json(json!(d.info())))
}

#[derive(Debug, Deserialize)]
struct SummaryQuery {
    bins: Option<usize>,
}

async fn dataset_summary(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SummaryQuery>,
) -> ApiResult<Response> {
    let d = st.store.dataset(&id).ok_or_else(|| ApiError::not_found("dataset", &id))?;
    let bins = q.bins.unwrap_or(EvalConfig::default().thresholds.bins).clamp(1, 100);
    let columns: Vec<Value> = d
        .dataset
        .columns()
        .iter()
        .map(|c| json!({ "name": c.name(), "stats": summary_stats(c, bins) }))
        .collect();
    let body = json!({ "dataset_id": id, "row_count": d.dataset.row_count(), "columns": columns });
    Ok(json_bytes(canonical_json(&body)))
}

#[derive(Debug, Deserialize)]
struct EvaluationRequest {
    dataset_id: String,
    #[serde(default)]
    cfg: EvalConfig,
}

#[derive(Debug, Serialize)]
struct EvaluationCreated {
    evaluation_id: String,
    state: EvalState,
}

async fn create_evaluation(
    State(st): State<AppState>,
    Json(req): Json<EvaluationRequest>,
) -> ApiResult<(StatusCode, Json<EvaluationCreated>)> {
    let stored = st
        .store
        .dataset(&req.dataset_id)
        .ok_or_else(|| ApiError::not_found("dataset", &req.dataset_id))?;

    // Reject bad requests before a record exists.
    let resolved = req.cfg.resolve_for(&stored.dataset).map_err(EngineError::from)?;
    let with_roles = stored
        .dataset
        .clone()
        .with_roles(resolved.roles.clone())
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_ROLES", e.to_string()))?;
    if let Some(expected) = &resolved.expected_fingerprint {
        let actual = schema_fingerprint(&with_roles);
        if *expected != actual {
            return Err(EngineError::SchemaMismatch {
                expected: expected.clone(),
                actual,
            }
            .into());
        }
    }

    let mut rec = EvaluationRecord {
        evaluation_id: new_id("ev"),
        dataset_id: stored.id.clone(),
        cfg: req.cfg.clone(),
        state: EvalState::Pending,
        report: None,
        error: None,
    };
    st.store.put_evaluation(rec.clone())?;
    rec.state = EvalState::Running;
    st.store.put_evaluation(rec.clone())?;

    let cfg = req.cfg;
    let outcome = tokio::task::spawn_blocking(move || inspect(&stored.dataset, &cfg)).await;
    match outcome {
        Ok(Ok(report)) => {
            rec.state = EvalState::Done;
            rec.report = Some(report);
        }
        Ok(Err(e)) => {
            rec.state = EvalState::Failed;
            rec.error = Some(e.to_string());
        }
        Err(e) => {
            rec.state = EvalState::Failed;
            rec.error = Some(format!("evaluation aborted: {e}"));
        }
    }
    info!(evaluation = %rec.evaluation_id, dataset = %rec.dataset_id, state = ?rec.state, "evaluation finished");
    st.store.put_evaluation(rec.clone())?;
    Ok((
        StatusCode::ACCEPTED,
        Json(EvaluationCreated {
            evaluation_id: rec.evaluation_id,
            state: rec.state,
        }),
    ))
}

async fn list_evaluations(State(st): State<AppState>) -> Json<Value> {
    let brief: Vec<Value> = st
        .store
        .evaluations()
        .into_iter()
        .map(|r| json!({ "evaluation_id": r.evaluation_id, "dataset_id": r.dataset_id, "state": r.state }))
        .collect();
    Json(json!(brief))
}

fn evaluation(st: &AppState, id: &str) -> ApiResult<EvaluationRecord> {
    st.store.evaluation(id).ok_or_else(|| ApiError::not_found("evaluation", id))
}

async fn get_evaluation(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(json_bytes(canonical_json(&evaluation(&st, &id)?)))
}

fn finished_report(st: &AppState, id: &str) -> ApiResult<readiness_core::ReadinessReport> {
    let rec = evaluation(st, id)?;
    rec.report.ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "NOT_DONE",
            format!("evaluation `{id}` is {:?}", rec.state).to_lowercase(),
        )
    })
}

async fn evaluation_json(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(json_bytes(render_json(&finished_report(&st, &id)?)))
}

async fn evaluation_html(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(html(render_html(&finished_report(&st, &id)?)))
}

#[derive(Debug, Deserialize)]
pub struct CreateRun {
    #[serde(default)]
    pub config: EvalConfig,
    pub expected_clients: BTreeSet<String>,
    /// Seconds from now until the run closes on its own.
    #[serde(default)]
    pub deadline_secs: Option<u64>,
}

async fn create_run(State(st): State<AppState>, Json(req): Json<CreateRun>) -> ApiResult<(StatusCode, Json<Value>)> {
    let mut cfg = req.config;
    cfg.validate()
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_CONFIG", e.to_string()))?;
    if req.expected_clients.is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_RUN", "no expected clients"));
    }
    cfg.suppress_small_bins |= st.suppress_small_bins;
    let deadline = req.deadline_secs.map(|s| Utc::now() + chrono::Duration::seconds(s as i64));
    st.coordinator.create_run(cfg.clone(), req.expected_clients.clone(), deadline)?;
    info!(run = %cfg.run_id, clients = req.expected_clients.len(), "federated run created");
    Ok((
        StatusCode::CREATED,
        Json(json!({ "run_id": cfg.run_id, "expected_clients": req.expected_clients, "deadline": deadline })),
    ))
}

async fn list_runs(State(st): State<AppState>) -> Json<Value> {
    let now = Utc::now();
    let runs: Vec<Value> = st
        .coordinator
        .run_ids()
        .into_iter()
        .map(|id| {
            let closed = st.coordinator.report(&id, now).is_ok();
            json!({ "run_id": id, "closed": closed })
        })
        .collect();
    Json(json!(runs))
}

/// Maps a coordinator reply to an HTTP status.
fn envelope_response(reply: Envelope) -> Response {
    let status = match &reply.message {
        Message::Error { code, .. } => match code.as_str() {
            "UNKNOWN_RUN" => StatusCode::NOT_FOUND,
            "UNKNOWN_CLIENT" => StatusCode::FORBIDDEN,
            "UNSUPPORTED_VERSION" | "UNEXPECTED_MESSAGE" | "WRONG_RUN" | "MERGE_FAILED" => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            _ => StatusCode::CONFLICT,
        },
        _ => StatusCode::OK,
    };
    (status, Json(reply)).into_response()
}

#[derive(Debug, Deserialize)]
struct HelloBody {
    client_id: String,
}

async fn hello(State(st): State<AppState>, Path(run_id): Path<String>, Json(body): Json<HelloBody>) -> Response {
    let msg = Message::Hello {
        run_id,
        client_id: body.client_id,
    };
    envelope_response(st.coordinator.handle_message(Envelope::new(msg), Utc::now()))
}

async fn submit_summary(
    State(st): State<AppState>,
    Path(run_id): Path<String>,
    Json(summary): Json<ClientSummary>,
) -> ApiResult<Response> {
    if summary.run_id != run_id {
        return Err(SessionError::WrongRun {
            expected: run_id,
            got: summary.run_id,
        }
        .into());
    }
    info!(run = %run_id, client = %summary.client_id, "summary received");
    let env = Envelope::new(Message::SummarySubmit { summary });
    Ok(envelope_response(st.coordinator.handle_message(env, Utc::now())))
}

async fn close_run(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(json_bytes(canonical_json(&st.coordinator.close(&id)?)))
}

async fn run_report(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(json_bytes(canonical_json(&st.coordinator.report(&id, Utc::now())?)))
}

async fn run_report_html(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let r = st.coordinator.report(&id, Utc::now())?;
    Ok(html(render_html(&r.to_readiness_report())))
}

/// Raw protocol endpoint: one length-prefixed frame in, one out.
async fn frame(State(st): State<AppState>, body: Bytes) -> Response {
    let reply = st.coordinator.handle_frame(&body, Utc::now());
    bytes_response("application/octet-stream", reply)
}
