//! HTTP/JSON session service. Every payload carries `schema_version`;
//! responses only expose what the session's feedback condition allows.
//!
//! Routes: `GET /healthz`, `GET /scenarios`, `POST /sessions`,
//! `POST /sessions/{id}/demos`, `POST /sessions/{id}/realizations`,
//! `POST /sessions/{id}/stop`, `GET /sessions/{id}/report`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use teachgym_core::metrics::RealizationRecord;
use teachgym_core::scenarios::Scenario;
use teachgym_core::session::{
    FeedbackCondition, NoClock, SessionConfig, StopReason, TeachingSession, SCHEMA_VERSION,
};
use teachgym_core::task::Task;
use teachgym_core::{Demonstration, Error as CoreError, Gripper, Point, Sample, Trajectory};
use tokio::sync::{Mutex, RwLock};

use crate::config::{LearnerOverrides, ResolvedServe};
use crate::error::{AppError, AppResult};
use crate::formats::report_json;
use crate::logfile::write_log;
use crate::parallel::Parallel;
use crate::render;

/// An error response: status plus message.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }

    /// Status for a failed demonstration step.
    fn from_step(e: CoreError) -> Self {
        match e {
            CoreError::SessionStopped => ApiError::conflict(e.to_string()),
            CoreError::DimensionMismatch { .. }
            | CoreError::InvalidTrajectory(_)
            | CoreError::TestItemOutOfRange { .. }
            | CoreError::NoActionMarks => ApiError::bad_request(e.to_string()),
            _ => ApiError::internal(format!("fit failed, session unchanged: {e}")),
        }
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        ApiError::internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "schema_version": SCHEMA_VERSION,
            "error": {"status": self.status.as_u16(), "message": self.message},
        });
        (self.status, axum::Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

fn json_response(status: StatusCode, value: &Value) -> Response {
    (status, axum::Json(value)).into_response()
}

fn raw_json(bytes: Vec<u8>) -> Response {
    (
        StatusCode::OK,
        [(header::CONTENT_TYPE, "application/json")],
        bytes,
    )
        .into_response()
}

struct Entry {
    id: String,
    scenario: String,
    created_at: u64,
    session: TeachingSession,
    /// Response body of the first stop, returned again on later stops.
    stop_response: Option<Vec<u8>>,
}

/// Shared service state: scenarios, live sessions and the log directory.
pub struct AppState {
    scenarios: Vec<Scenario>,
    log_dir: PathBuf,
    next_id: AtomicU64,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Entry>>>>,
}

impl AppState {
    pub fn new(scenarios: Vec<Scenario>, log_dir: PathBuf) -> Arc<Self> {
        Arc::new(AppState {
            scenarios,
            log_dir,
            next_id: AtomicU64::new(1),
            sessions: RwLock::new(BTreeMap::new()),
        })
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.log_dir.join(format!("{id}.jsonl"))
    }

    fn flush(&self, entry: &Entry) -> AppResult<()> {
        write_log(&self.log_path(&entry.id), &entry.session.log())
    }

    async fn entry(&self, id: &str) -> ApiResult<Arc<Mutex<Entry>>> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session '{id}'")))
    }

    /// Rewrite every session log; used on shutdown.
    pub async fn flush_all(&self) -> AppResult<()> {
        let entries: Vec<_> = self.sessions.read().await.values().cloned().collect();
        for e in entries {
            self.flush(&*e.lock().await)?;
        }
        Ok(())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/scenarios", get(list_scenarios))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/demos", post(submit_demo))
        .route("/sessions/{id}/realizations", post(request_realization))
        .route("/sessions/{id}/stop", post(stop_session))
        .route("/sessions/{id}/report", get(get_report))
        .with_state(state)
}

async fn healthz() -> Response {
    json_response(
        StatusCode::OK,
        &json!({"schema_version": SCHEMA_VERSION, "status": "ok", "version": crate::VERSION}),
    )
}

async fn list_scenarios(State(state): State<Arc<AppState>>) -> Response {
    let list: Vec<Value> = state
        .scenarios
        .iter()
        .map(|s| {
            let conditions: Vec<&str> = FeedbackCondition::ALL
                .iter()
                .filter(|c| c.allowed_for(&s.task))
                .map(|c| c.as_str())
                .collect();
            json!({
                "name": s.name,
                "description": s.description,
                "task": s.task,
                "test_set": s.test_set(),
                "conditions": conditions,
            })
        })
        .collect();
    json_response(
        StatusCode::OK,
        &json!({"schema_version": SCHEMA_VERSION, "scenarios": list}),
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    scenario: String,
    condition: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    learner: LearnerOverrides,
}

fn session_json(e: &Entry) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "id": e.id,
        "scenario": e.scenario,
        "condition": e.session.condition(),
        "created_at": e.created_at,
        "state": if e.session.is_stopped() { "stopped" } else { "teaching" },
        "test_size": e.session.test_set().len(),
    })
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: CreateRequest = parse_body(&body)?;
    let scenario = state
        .scenarios
        .iter()
        .find(|s| s.name == req.scenario)
        .ok_or_else(|| ApiError::not_found(format!("unknown scenario '{}'", req.scenario)))?;
    let condition: FeedbackCondition = req
        .condition
        .parse()
        .map_err(|e: CoreError| ApiError::bad_request(e.to_string()))?;
    let mut config = SessionConfig::for_task(&scenario.task, condition, req.seed);
    config.learner = req.learner.apply(config.learner);
    let session = TeachingSession::new(scenario.task.clone(), scenario.test_set(), config)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let id = format!("s{:06}", state.next_id.fetch_add(1, Ordering::Relaxed));
    let created_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let entry = Entry {
        id: id.clone(),
        scenario: scenario.name.clone(),
        created_at,
        session,
        stop_response: None,
    };
    state.flush(&entry)?;
    let body = session_json(&entry);
    state
        .sessions
        .write()
        .await
        .insert(id, Arc::new(Mutex::new(entry)));
    Ok(json_response(StatusCode::CREATED, &body))
}

/// A drawn path. Timestamps default to uniform spacing; pick-and-place
/// paths carry a gripper state per point and name their target.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DemoRequest {
    points: Vec<Vec<f64>>,
    #[serde(default)]
    t: Option<Vec<f64>>,
    #[serde(default)]
    gripper: Option<Vec<Gripper>>,
    #[serde(default)]
    target_index: Option<usize>,
}

fn build_demo(task: &Task, req: DemoRequest) -> ApiResult<Demonstration> {
    let n = req.points.len();
    if n < 2 {
        return Err(ApiError::bad_request(format!(
            "a path needs at least 2 points, got {n}"
        )));
    }
    let t = match req.t {
        Some(t) if t.len() != n => {
            return Err(ApiError::bad_request(format!(
                "{} timestamps for {n} points",
                t.len()
            )))
        }
        Some(t) => t,
        None => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    };
    let points = req
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            Point::from_slice(p).map_err(|e| ApiError::bad_request(format!("point {i}: {e}")))
        })
        .collect::<ApiResult<Vec<_>>>()?;
    let trajectory = match req.gripper {
        Some(g) if g.len() != n => {
            return Err(ApiError::bad_request(format!(
                "{} gripper states for {n} points",
                g.len()
            )))
        }
        Some(g) => {
            let samples = points
                .into_iter()
                .zip(t)
                .zip(g)
                .map(|((p, t), g)| Sample::with_gripper(t, p, g))
                .collect();
            Trajectory::with_marks_from_gripper(samples)
        }
        None => Trajectory::new(
            points
                .into_iter()
                .zip(t)
                .map(|(p, t)| Sample::new(t, p))
                .collect(),
            None,
        ),
    }
    .map_err(|e| ApiError::bad_request(e.to_string()))?;
    match task {
        Task::Maze(_) if req.target_index.is_some() => Err(ApiError::bad_request(
            "maze demonstrations take no target_index",
        )),
        Task::Maze(_) => Ok(Demonstration::maze(trajectory)),
        Task::PickPlace(_) => {
            let target = req.target_index.ok_or_else(|| {
                ApiError::bad_request("pick-and-place demonstrations need target_index")
            })?;
            Ok(Demonstration::pick_place(trajectory, target))
        }
    }
}

fn svg_field(svg: String) -> Value {
    json!({"media_type": "image/svg+xml", "data": svg})
}

/// The step response allowed by the condition.
fn step_response(entry: &Entry, shown: &[RealizationRecord]) -> ApiResult<Value> {
    let s = &entry.session;
    let step = s
        .steps()
        .last()
        .ok_or_else(|| ApiError::internal("step missing after success"))?;
    let mut body =
        json!({"schema_version": SCHEMA_VERSION, "accepted": true, "demo_count": s.steps().len()});
    let obj = body.as_object_mut().expect("object literal");
    match s.condition() {
        FeedbackCondition::Nf => {}
        FeedbackCondition::Vf | FeedbackCondition::Vr => {
            let svg = render::render_feedback(s.task(), shown, s.demonstrations())?;
            let outcomes: Vec<bool> = shown.iter().map(|r| r.membership.is_member).collect();
            obj.insert("classification".into(), json!(step.classification));
            obj.insert("demo_membership".into(), json!(step.demo_membership));
            obj.insert("outcomes".into(), json!(outcomes));
            obj.insert(
                "efficacy".into(),
                json!({"successes": step.efficacy.successes, "test_size": step.efficacy.test_size, "efficacy": step.efficacy.efficacy}),
            );
            obj.insert(
                "efficiency".into(),
                json!(step.efficacy.efficacy / s.steps().len() as f64),
            );
            obj.insert("svg".into(), svg_field(svg));
        }
        FeedbackCondition::Rf | FeedbackCondition::Bf | FeedbackCondition::Sf => {
            obj.insert("feedback".into(), json!(shown));
        }
    }
    Ok(body)
}

async fn submit_demo(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let entry = state.entry(&id).await?;
    let req: DemoRequest = parse_body(&body)?;
    let guard = entry.lock_owned().await;
    if guard.session.is_stopped() {
        return Err(ApiError::conflict("session is stopped"));
    }
    let demo = build_demo(guard.session.task(), req)?;
    let state2 = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut entry = guard;
        entry
            .session
            .step(demo, None, &Parallel, &NoClock)
            .map_err(ApiError::from_step)?;
        let shown = entry.session.deliver_feedback(&[]);
        state2.flush(&entry)?;
        step_response(&entry, &shown).map(|v| json_response(StatusCode::OK, &v))
    })
    .await
    .map_err(|e| ApiError::internal(format!("step worker failed: {e}")))?
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RealizationRequest {
    test_item: usize,
}

async fn request_realization(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let entry = state.entry(&id).await?;
    let req: RealizationRequest = parse_body(&body)?;
    let mut entry = entry.lock().await;
    let records = entry
        .session
        .request_realizations(&[req.test_item])
        .map_err(|e| match e {
            CoreError::TestItemOutOfRange { .. } => ApiError::bad_request(e.to_string()),
            _ => ApiError::conflict(e.to_string()),
        })?;
    state.flush(&entry)?;
    Ok(json_response(
        StatusCode::OK,
        &json!({"schema_version": SCHEMA_VERSION, "realization": records[0]}),
    ))
}

fn report_value(session: &TeachingSession) -> ApiResult<Option<Value>> {
    match session.report() {
        Ok(r) => {
            let text = report_json(&r)?;
            Ok(Some(
                serde_json::from_str(&text).map_err(|e| ApiError::internal(e.to_string()))?,
            ))
        }
        Err(CoreError::NoDemonstrations) => Ok(None),
        Err(e) => Err(ApiError::internal(e.to_string())),
    }
}

async fn stop_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let entry = state.entry(&id).await?;
    let mut entry = entry.lock().await;
    if let Some(bytes) = &entry.stop_response {
        return Ok(raw_json(bytes.clone()));
    }
    entry.session.stop(StopReason::External);
    state.flush(&entry)?;
    let body = json!({
        "schema_version": SCHEMA_VERSION,
        "id": entry.id,
        "state": "stopped",
        "report": report_value(&entry.session)?,
    });
    let bytes = serde_json::to_vec(&body).map_err(|e| ApiError::internal(e.to_string()))?;
    entry.stop_response = Some(bytes.clone());
    Ok(raw_json(bytes))
}

async fn get_report(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let entry = state.entry(&id).await?;
    let entry = entry.lock().await;
    let s = &entry.session;
    if !s.is_stopped() && !s.condition().reveals_efficacy() {
        return Err(ApiError::conflict(format!(
            "{} reveals the report only after the session stops",
            s.condition()
        )));
    }
    match report_value(s)? {
        Some(v) => Ok(json_response(StatusCode::OK, &v)),
        None => Err(ApiError::conflict("no demonstrations yet")),
    }
}

/// Bind, serve until Ctrl-C or SIGTERM, then flush every session log.
pub async fn serve(resolved: ResolvedServe) -> AppResult<()> {
    let addr = format!("{}:{}", resolved.config.host, resolved.config.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| AppError::Internal(format!("cannot listen on {addr}: {e}")))?;
    let local = listener
        .local_addr()
        .map_err(|e| AppError::Internal(e.to_string()))?
        .to_string();
    eprintln!("teachgym: listening on http://{local}");
    let state = AppState::new(resolved.scenarios, resolved.config.log_dir);
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown_signal())
        .await
        .map_err(|e| AppError::Internal(format!("server failed: {e}")))?;
    state.flush_all().await
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
