//! Session-based JSON API over HTTP for animating and checking protocols.
//!
//! Sessions live in memory and expire after an idle period. Each session is
//! guarded by its own lock, so requests to one session are serialized while
//! different sessions proceed in parallel.

mod session;

use std::collections::HashMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use plsanim_core::checker::{check_from, CheckOptions, ExploreOptions, DEFAULT_DEPTH};
use plsanim_core::protocols::trace_from_json;
use plsanim_core::terms::parse;
use plsanim_core::{
    AttackMode, EveLocation, Property, PropertyKind, ProtocolEvent, ProtocolKind, SignalPattern, Verdict,
};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Mutex as SessionLock;
use tower_http::services::ServeDir;

pub use session::{CreateError, Session, StepError};

/// Deepest exploration a client may request.
pub const MAX_DEPTH: usize = 100;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Directory served at `/`, typically the built web UI.
    pub static_dir: Option<PathBuf>,
    pub idle_timeout: Duration,
    /// Wall-clock budget of a single check.
    pub check_budget: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            static_dir: None,
            idle_timeout: Duration::from_secs(60 * 60),
            check_budget: Duration::from_secs(120),
        }
    }
}

struct Entry {
    session: Arc<SessionLock<Session>>,
    last_used: Instant,
}

#[derive(Clone)]
pub struct AppState {
    config: Arc<ServiceConfig>,
    sessions: Arc<Mutex<HashMap<String, Entry>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState { config: Arc::new(config), sessions: Arc::default() }
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session table").len()
    }

    fn sweep(&self, table: &mut HashMap<String, Entry>) {
        let idle = self.config.idle_timeout;
        table.retain(|_, e| e.last_used.elapsed() < idle);
    }

    fn insert(&self, session: Session) -> Arc<SessionLock<Session>> {
        let mut table = self.sessions.lock().expect("session table");
        self.sweep(&mut table);
        let id = session.id.clone();
        let session = Arc::new(SessionLock::new(session));
        table.insert(id, Entry { session: session.clone(), last_used: Instant::now() });
        session
    }

    fn lookup(&self, id: &str) -> Result<Arc<SessionLock<Session>>, ApiError> {
        let mut table = self.sessions.lock().expect("session table");
        self.sweep(&mut table);
        let entry = table.get_mut(id).ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))?;
        entry.last_used = Instant::now();
        Ok(entry.session.clone())
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn body<T: for<'de> Deserialize<'de>>(bytes: &Bytes) -> Result<T, ApiError> {
    let bytes: &[u8] = if bytes.is_empty() { b"{}" } else { bytes };
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

fn name<T: std::str::FromStr>(text: &str) -> Result<T, ApiError>
where
    T::Err: std::fmt::Display,
{
    text.parse().map_err(|e: T::Err| ApiError::bad_request(e.to_string()))
}

/// Builds the API router.
pub fn router(state: AppState) -> Router {
    let static_dir = state.config.static_dir.clone();
    let api = Router::new()
        .route("/api/protocols", get(list_protocols))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_state))
        .route("/api/sessions/{id}/step", post(post_step))
        .route("/api/sessions/{id}/reset", post(post_reset))
        .route("/api/sessions/{id}/check", post(post_check))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(middleware::from_fn(log_call))
}

/// Serves the API on `listener` until `shutdown` completes.
pub async fn serve(
    listener: tokio::net::TcpListener,
    config: ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(AppState::new(config));
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

async fn log_call(req: Request, next: Next) -> Response {
    let (method, path) = (req.method().clone(), req.uri().path().to_string());
    let start = Instant::now();
    let res = next.run(req).await;
    tracing::info!("{method} {path} {} {:.1?}", res.status().as_u16(), start.elapsed());
    res
}

async fn list_protocols() -> Json<Value> {
    let protocols: Vec<Value> = ProtocolKind::ALL
        .iter()
        .map(|p| {
            json!({
                "name": p.name(),
                "jamming": p.is_wj(),
                "diffie_hellman": p.is_dh(),
                "default_depth": DEFAULT_DEPTH,
            })
        })
        .collect();
    Json(json!({
        "protocols": protocols,
        "eve_locations": EveLocation::ALL.iter().map(|e| e.name()).collect::<Vec<_>>(),
        "modes": AttackMode::ALL.iter().map(|m| m.name()).collect::<Vec<_>>(),
        "properties": PropertyKind::ALL.iter().map(|p| p.name()).collect::<Vec<_>>(),
        "default_depth": DEFAULT_DEPTH,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    protocol: String,
    eve: Option<String>,
    mode: Option<String>,
    /// A previously exported trace to resume from.
    trace: Option<Value>,
}

async fn create_session(State(state): State<AppState>, bytes: Bytes) -> ApiResult {
    let req: CreateRequest = body(&bytes)?;
    let protocol: ProtocolKind = name(&req.protocol)?;
    let eve: EveLocation = name(req.eve.as_deref().unwrap_or("eve3"))?;
    let mode: AttackMode = name(req.mode.as_deref().unwrap_or("active"))?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let mut session = Session::new(id, protocol, eve, mode).map_err(|e| ApiError::bad_request(e.to_string()))?;
    if let Some(trace) = &req.trace {
        let trace =
            trace_from_json(trace, &session.config().bounds).map_err(|e| ApiError::bad_request(e.to_string()))?;
        session.replay(trace).map_err(|e| ApiError::bad_request(e.to_string()))?;
    }
    let doc = session.to_json();
    state.insert(session);
    Ok((StatusCode::CREATED, Json(doc)).into_response())
}

async fn get_state(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let session = state.lookup(&id)?;
    let doc = session.lock().await.to_json();
    Ok(Json(doc).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRequest {
    index: usize,
}

async fn post_step(State(state): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let session = state.lookup(&id)?;
    let req: StepRequest = body(&bytes)?;
    let mut s = session.lock().await;
    s.step(req.index).map_err(|e| match e {
        StepError::OutOfRange { index, enabled } => {
            ApiError::conflict(format!("index {index} does not name one of the {enabled} enabled events"))
        }
        StepError::Terminated => ApiError::conflict("the session has terminated"),
        StepError::Kernel(e) => ApiError::internal(e.to_string()),
    })?;
    Ok(Json(s.to_json()).into_response())
}

async fn post_reset(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let session = state.lookup(&id)?;
    let mut s = session.lock().await;
    s.reset();
    Ok(Json(s.to_json()).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternRequest {
    kind: String,
    #[serde(rename = "self")]
    agent: Option<String>,
    peer: Option<String>,
    p1: Option<String>,
    p2: Option<String>,
}

impl PatternRequest {
    /// Missing slots match anything.
    fn text(&self) -> String {
        let slot = |s: &Option<String>| s.clone().unwrap_or_else(|| "*".into());
        format!("{}.{}.{}.{}.{}", self.kind, slot(&self.agent), slot(&self.peer), slot(&self.p1), slot(&self.p2))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckRequest {
    property: String,
    depth: Option<usize>,
    message: Option<String>,
    trigger: Option<PatternRequest>,
    guard: Option<PatternRequest>,
}

async fn post_check(State(state): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let session = state.lookup(&id)?;
    let req: CheckRequest = body(&bytes)?;
    let kind: PropertyKind = name(&req.property)?;
    let depth = req.depth.unwrap_or(DEFAULT_DEPTH);
    if depth > MAX_DEPTH {
        return Err(ApiError::bad_request(format!("depth {depth} exceeds the maximum of {MAX_DEPTH}")));
    }
    let budget = state.config.check_budget;
    // Holding the lock for the whole check keeps the session single-writer.
    let s = session.lock_owned().await;
    let bounds = s.config().bounds;
    let message = req
        .message
        .as_deref()
        .map(|m| parse(m, &bounds))
        .transpose()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let pattern = |p: &Option<PatternRequest>| {
        p.as_ref()
            .map(|p| SignalPattern::parse(&p.text(), &bounds))
            .transpose()
            .map_err(|e| ApiError::bad_request(e.to_string()))
    };
    let property = Property::from_parts(kind, message, pattern(&req.trigger)?, pattern(&req.guard)?, s.config());
    let result = tokio::task::spawn_blocking(move || {
        let opts = CheckOptions {
            explore: ExploreOptions { depth, deadline: Some(Instant::now() + budget), ..ExploreOptions::default() },
        };
        let start = Instant::now();
        let verdict = check_from(s.root(), s.trace(), &property, &opts);
        (verdict, start.elapsed(), s.trace().len(), property)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?;
    let (verdict, elapsed, prefix_length, property) = result;
    let verdict = verdict.map_err(|e| ApiError::internal(e.to_string()))?;
    let status = if matches!(verdict, Verdict::Timeout { .. }) { StatusCode::ACCEPTED } else { StatusCode::OK };
    Ok((status, Json(verdict_json(&verdict, &property, depth, prefix_length, elapsed))).into_response())
}

fn property_json(p: &Property) -> Value {
    match p {
        Property::Secrecy { message } => {
            json!({ "kind": "secrecy", "message": message.as_ref().map(|m| m.to_string()) })
        }
        Property::Correspondence { trigger, guard } => {
            json!({ "kind": "corr", "trigger": trigger.to_string(), "guard": guard.to_string() })
        }
        Property::Injective { trigger, guard } => {
            json!({ "kind": "inj-corr", "trigger": trigger.to_string(), "guard": guard.to_string() })
        }
    }
}

/// The verdict document returned by the check endpoint.
pub fn verdict_json(v: &Verdict, p: &Property, depth: usize, prefix_length: usize, elapsed: Duration) -> Value {
    let (verdict, bounded) = match v {
        Verdict::Holds { max_depth_hit, .. } => ("holds", *max_depth_hit),
        Verdict::Violated { .. } => ("violated", false),
        Verdict::Timeout { .. } => ("timeout", true),
    };
    json!({
        "verdict": verdict,
        "label": v.label(),
        "bounded": bounded,
        "property": property_json(p),
        "depth": depth,
        "prefix_length": prefix_length,
        "counterexample": v.counterexample().map(|t| t.iter().map(ProtocolEvent::to_json).collect::<Vec<_>>()),
        "states_explored": v.states_explored(),
        "elapsed_ms": elapsed.as_millis() as u64,
    })
}
