//! Routes and handlers.
//!
//! Requester routes: `POST /v1/emails`, `GET /v1/emails/{id}`,
//! `GET /v1/emails/{id}/result`.
//! Worker routes: `PUT /v1/workers/{id}`, `GET /v1/workers/{id}/tasks/next`,
//! `GET /v1/tasks/{assignment}`, `POST /v1/tasks/{assignment}/steps`,
//! `GET /v1/taxonomy`.
//! Operator routes under `/v1/admin`: expiry sweep, failing an email, and
//! setting a manual clock.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use crowdtone_core::orchestrator::{ResultView, StepReceipt};
use crowdtone_core::provider::{Education, WorkerProfile};
use crowdtone_core::{
    taxonomy, AssignmentId, EmailSubmission, Millis, Orchestrator, PipelineConfig, StepPayload, TaskId, WorkerId,
};
use parking_lot::RwLock;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tracing::info;

use crate::clock::Clock;
use crate::error::ApiError;

pub struct AppState {
    orch: RwLock<Orchestrator>,
    workers: RwLock<BTreeMap<WorkerId, WorkerProfile>>,
    clock: Arc<dyn Clock>,
    default_config: PipelineConfig,
    tokens: Option<BTreeSet<String>>,
}

impl AppState {
    pub fn new(orch: Orchestrator, clock: Arc<dyn Clock>) -> Self {
        Self {
            orch: RwLock::new(orch),
            workers: RwLock::new(BTreeMap::new()),
            clock,
            default_config: PipelineConfig::default(),
            tokens: None,
        }
    }

    /// Pipeline settings used when a submission gives no overrides.
    pub fn with_default_config(mut self, config: PipelineConfig) -> Self {
        self.default_config = config;
        self
    }

    /// Requires `Authorization: Bearer <token>` on every route except
    /// `/v1/health`.
    pub fn with_tokens(mut self, tokens: impl IntoIterator<Item = String>) -> Self {
        self.tokens = Some(tokens.into_iter().collect());
        self
    }

    pub fn orchestrator(&self) -> &RwLock<Orchestrator> {
        &self.orch
    }

    fn now(&self) -> Millis {
        self.clock.now()
    }
}

/// Reads bearer tokens from a file, one per line; blank lines and `#`
/// comments are skipped.
pub fn parse_token_file(contents: &str) -> Vec<String> {
    contents
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

type Shared = Arc<AppState>;
type ApiResult<T> = Result<T, ApiError>;

/// JSON body whose parse failures come back as `malformed_body`.
struct Body<T>(T);

impl<S, T> FromRequest<S> for Body<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(rejection(e)),
        }
    }
}

fn rejection(e: JsonRejection) -> ApiError {
    ApiError::malformed(e.body_text())
}

pub fn router(state: Shared, cors_origins: &[String]) -> Router {
    let api = Router::new()
        .route("/v1/emails", post(submit_email))
        .route("/v1/emails/{task_id}", get(email_status))
        .route("/v1/emails/{task_id}/result", get(email_result))
        .route("/v1/workers/{worker_id}", put(register_worker).get(get_worker))
        .route("/v1/workers/{worker_id}/tasks/next", get(next_task))
        .route("/v1/tasks/{assignment_id}", get(task_document))
        .route("/v1/tasks/{assignment_id}/steps", post(submit_step))
        .route("/v1/taxonomy", get(get_taxonomy))
        .route("/v1/schema", get(get_schema))
        .route("/v1/admin/expire", post(expire))
        .route("/v1/admin/emails/{task_id}/fail", post(fail_email))
        .route("/v1/admin/clock", get(get_clock).put(set_clock))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));

    let mut app = Router::new()
        .route("/v1/health", get(|| async { Json(serde_json::json!({"status": "ok"})) }))
        .merge(api)
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(state);

    if !cors_origins.is_empty() {
        let origins: Vec<HeaderValue> = cors_origins.iter().filter_map(|o| o.parse().ok()).collect();
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST, Method::PUT])
                .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]),
        );
    }
    app
}

async fn require_token(State(state): State<Shared>, req: Request, next: Next) -> Response {
    if let Some(tokens) = &state.tokens {
        let presented = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if !presented.is_some_and(|t| tokens.contains(t.trim())) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or unknown bearer token")
                .into_response();
        }
    }
    next.run(req).await
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub task_id: TaskId,
}

/// Email fields at the top level, plus an optional `config` object whose
/// keys override the service defaults.
async fn submit_email(State(state): State<Shared>, Body(body): Body<Value>) -> ApiResult<Response> {
    let Value::Object(mut fields) = body else {
        return Err(ApiError::malformed("expected a JSON object"));
    };
    let overrides = fields.remove("config");
    let email: EmailSubmission =
        serde_json::from_value(Value::Object(fields)).map_err(|e| ApiError::malformed(e.to_string()))?;
    let config = merge_config(&state.default_config, overrides)?;

    let task_id = state.orch.write().submit(email, config, state.now())?;
    info!(%task_id, "email submitted");
    let location = format!("/v1/emails/{task_id}");
    Ok((
        StatusCode::CREATED,
        [(header::LOCATION, location)],
        Json(SubmitResponse { task_id }),
    )
        .into_response())
}

fn merge_config(base: &PipelineConfig, overrides: Option<Value>) -> ApiResult<PipelineConfig> {
    let Some(overrides) = overrides else {
        return Ok(base.clone());
    };
    let Value::Object(overrides) = overrides else {
        return Err(ApiError::malformed("config must be an object"));
    };
    let Value::Object(mut merged) = serde_json::to_value(base).expect("config serializes") else {
        unreachable!("config serializes to an object")
    };
    merged.extend(overrides);
    serde_json::from_value(Value::Object(merged)).map_err(|e| ApiError::malformed(format!("config: {e}")))
}

async fn email_status(State(state): State<Shared>, Path(task_id): Path<String>) -> ApiResult<Response> {
    let status = state.orch.read().status(&TaskId::from(task_id))?;
    Ok(Json(status).into_response())
}

async fn email_result(State(state): State<Shared>, Path(task_id): Path<String>) -> ApiResult<Response> {
    match state.orch.read().result(&TaskId::from(task_id))? {
        ResultView::Ready(r) => Ok(Json(r).into_response()),
        ResultView::Pending(status) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "result_pending",
            format!("task is {}", status.state.label()),
        )
        .with_detail(status)),
    }
}

#[derive(Debug, Clone, Deserialize)]
struct ProfileBody {
    #[serde(default)]
    worker_id: Option<WorkerId>,
    approval_rating: f64,
    locale: String,
    #[serde(default)]
    education: Option<Education>,
    #[serde(default)]
    native_speaker: Option<bool>,
}

async fn register_worker(
    State(state): State<Shared>,
    Path(worker_id): Path<String>,
    Body(body): Body<ProfileBody>,
) -> ApiResult<Response> {
    let worker_id = WorkerId::from(worker_id);
    if body.worker_id.as_ref().is_some_and(|w| *w != worker_id) {
        return Err(ApiError::malformed("worker_id in body differs from the path"));
    }
    let profile = WorkerProfile {
        worker_id: worker_id.clone(),
        approval_rating: body.approval_rating,
        locale: body.locale,
        education: body.education,
        native_speaker: body.native_speaker,
    };
    profile
        .validate()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_worker_profile", e.to_string()))?;
    state.workers.write().insert(worker_id, profile.clone());
    Ok(Json(profile).into_response())
}

fn profile(state: &AppState, worker_id: &str) -> ApiResult<WorkerProfile> {
    state
        .workers
        .read()
        .get(&WorkerId::from(worker_id))
        .cloned()
        .ok_or_else(|| ApiError::unknown_worker(worker_id))
}

async fn get_worker(State(state): State<Shared>, Path(worker_id): Path<String>) -> ApiResult<Response> {
    Ok(Json(profile(&state, &worker_id)?).into_response())
}

async fn next_task(State(state): State<Shared>, Path(worker_id): Path<String>) -> ApiResult<Response> {
    let worker = profile(&state, &worker_id)?;
    let mut orch = state.orch.write();
    match orch.next_task(&worker, state.now())? {
        Some(a) => Ok(Json(orch.task_document(&a.assignment_id)?).into_response()),
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

async fn task_document(State(state): State<Shared>, Path(assignment_id): Path<String>) -> ApiResult<Response> {
    let doc = state.orch.read().task_document(&AssignmentId::from(assignment_id))?;
    Ok(Json(doc).into_response())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRequest {
    pub worker_id: WorkerId,
    pub payload: StepPayload,
}

async fn submit_step(
    State(state): State<Shared>,
    Path(assignment_id): Path<String>,
    Body(body): Body<StepRequest>,
) -> ApiResult<Json<StepReceipt>> {
    let receipt = state.orch.write().submit_step(
        &AssignmentId::from(assignment_id),
        &body.worker_id,
        body.payload,
        state.now(),
    )?;
    Ok(Json(receipt))
}

async fn get_schema() -> Response {
    Json(crate::schema::document()).into_response()
}

async fn get_taxonomy() -> Response {
    Json(taxonomy()).into_response()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpireResponse {
    pub expired: Vec<AssignmentId>,
}

async fn expire(State(state): State<Shared>) -> ApiResult<Json<ExpireResponse>> {
    let expired = state.orch.write().expire_overdue(state.now())?;
    Ok(Json(ExpireResponse { expired }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailRequest {
    pub reason: String,
}

async fn fail_email(
    State(state): State<Shared>,
    Path(task_id): Path<String>,
    Body(body): Body<FailRequest>,
) -> ApiResult<Response> {
    let status = state.orch.write().fail(&TaskId::from(task_id), &body.reason, state.now())?;
    Ok(Json(status).into_response())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClockBody {
    pub now: Millis,
}

async fn get_clock(State(state): State<Shared>) -> Json<ClockBody> {
    Json(ClockBody { now: state.now() })
}

async fn set_clock(State(state): State<Shared>, Body(body): Body<ClockBody>) -> ApiResult<Json<ClockBody>> {
    if !state.clock.set(body.now) {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "clock_not_adjustable",
            "service runs on the wall clock",
        ));
    }
    Ok(Json(ClockBody { now: state.now() }))
}
