//! HTTP session service: create sessions, post user turns, read frame
//! summaries. Every turn is appended to the session's JSONL transcript and
//! synced to disk before the response is sent.

mod config;

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tracing::{error, info};

pub use config::{parse_pairs, ConfigError, EmbeddingConfig, LlmConfig, ServiceConfig, YesNoBackendKind, ENV_PREFIX};

use crate::dialogue::{DialogueEngine, DialogueError, SessionFrame, SessionMeta};
use crate::plan::PlanExport;
use crate::response::ResponseSource;
use crate::scenario::Phase;
use crate::spotdb::Theme;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("engine setup task failed: {0}")]
    Setup(String),
}

struct Session {
    frame: SessionFrame,
    log: File,
    ended: bool,
}

struct SessionSlot {
    /// Held for the whole turn, which serializes posts to one session.
    session: Mutex<Session>,
    last_active: Mutex<Instant>,
}

impl SessionSlot {
    fn touch(&self) {
        *self.last_active.lock().expect("session clock poisoned") = Instant::now();
    }
}

/// Shared state behind the router.
pub struct AppState {
    engine: Arc<DialogueEngine>,
    sessions: Mutex<HashMap<String, Arc<SessionSlot>>>,
    log_dir: PathBuf,
    ttl: Duration,
}

impl AppState {
    pub fn new(engine: Arc<DialogueEngine>, log_dir: &Path, ttl: Duration) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(log_dir).map_err(|source| ServiceError::Io {
            context: format!("creating log directory {}", log_dir.display()),
            source,
        })?;
        Ok(AppState {
            engine,
            sessions: Mutex::new(HashMap::new()),
            log_dir: log_dir.to_path_buf(),
            ttl,
        })
    }

    pub fn engine(&self) -> &DialogueEngine {
        &self.engine
    }

    /// JSONL transcript path of a session.
    pub fn log_path(&self, session_id: &str) -> PathBuf {
        self.log_dir.join(format!("{session_id}.jsonl"))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session map poisoned").len()
    }

    /// Drops sessions idle for longer than the TTL; returns how many.
    pub fn evict_idle(&self, now: Instant) -> usize {
        let mut sessions = self.sessions.lock().expect("session map poisoned");
        let before = sessions.len();
        sessions.retain(|_, slot| {
            let last = *slot.last_active.lock().expect("session clock poisoned");
            now.saturating_duration_since(last) <= self.ttl
        });
        before - sessions.len()
    }

    fn slot(&self, id: &str) -> Option<Arc<SessionSlot>> {
        self.sessions.lock().expect("session map poisoned").get(id).cloned()
    }
}

#[derive(Debug)]
struct ApiError {
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
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

#[derive(Debug, Serialize)]
struct CreatedSession {
    session_id: String,
    system_utterance: String,
    phase: Phase,
}

#[derive(Debug, Serialize)]
struct TurnReply {
    system_utterance: String,
    phase: Phase,
    ended: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    plan: Option<PlanExport>,
    source: ResponseSource,
    turn: usize,
}

#[derive(Debug, Serialize)]
struct FrameSummary {
    phase: Phase,
    turn_count: usize,
    introduced_spots: Vec<String>,
    theme: Option<Theme>,
    ended: bool,
}

fn parse_age(body: &Value) -> Result<u32, ApiError> {
    let bad = || ApiError::new(StatusCode::BAD_REQUEST, "`age` must be a non-negative integer");
    let age = body.get("age").ok_or_else(bad)?;
    age.as_u64().and_then(|a| u32::try_from(a).ok()).ok_or_else(bad)
}

async fn create_session(State(app): State<Arc<AppState>>, body: Option<Json<Value>>) -> Result<(StatusCode, Json<CreatedSession>), ApiError> {
    let Json(body) = body.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "expected a JSON body"))?;
    let age = parse_age(&body)?;
    let name = body.get("name").and_then(Value::as_str).map(String::from);
    let session_id = uuid::Uuid::new_v4().to_string();
    let (frame, opening) = app
        .engine
        .create_session(session_id.clone(), &SessionMeta { age: Some(age), name })
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let log = OpenOptions::new()
        .create_new(true)
        .append(true)
        .open(app.log_path(&session_id))
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("opening transcript: {e}")))?;
    let phase = frame.phase;
    let slot = Arc::new(SessionSlot {
        session: Mutex::new(Session { frame, log, ended: false }),
        last_active: Mutex::new(Instant::now()),
    });
    app.sessions
        .lock()
        .expect("session map poisoned")
        .insert(session_id.clone(), slot);
    info!(%session_id, age, "session created");
    Ok((
        StatusCode::CREATED,
        Json(CreatedSession {
            session_id,
            system_utterance: opening,
            phase,
        }),
    ))
}

fn run_turn(engine: &DialogueEngine, slot: &SessionSlot, text: &str) -> Result<TurnReply, ApiError> {
    let mut session = slot.session.lock().map_err(|_| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "session lock poisoned"))?;
    if session.ended {
        return Err(ApiError::new(StatusCode::CONFLICT, "the conversation has ended"));
    }
    // Advance a copy so a failed log write leaves the session unchanged.
    let mut frame = session.frame.clone();
    let result = engine.advance(&mut frame, text).map_err(|e| match e {
        DialogueError::TerminalState(_) => ApiError::new(StatusCode::CONFLICT, "the conversation has ended"),
        other => {
            error!(session_id = %frame.session_id, err = %other, "turn failed");
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string())
        }
    })?;
    let line = result.record.to_json_line() + "\n";
    session
        .log
        .write_all(line.as_bytes())
        .and_then(|()| session.log.flush())
        .and_then(|()| session.log.sync_data())
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("writing transcript: {e}")))?;
    session.frame = frame;
    session.ended = result.ended;
    slot.touch();
    Ok(TurnReply {
        system_utterance: result.system_utterance,
        phase: result.phase,
        ended: result.ended,
        plan: result.plan,
        source: result.source,
        turn: result.record.turn,
    })
}

async fn post_utterance(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Option<Json<Value>>,
) -> Result<Json<TurnReply>, ApiError> {
    let slot = app
        .slot(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session `{id}`")))?;
    let Json(body) = body.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "expected a JSON body"))?;
    let text = body
        .get("text")
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "`text` must be a non-empty string"))?
        .to_string();
    // The engine may block on the LLM; keep it off the async workers.
    let app2 = app.clone();
    tokio::task::spawn_blocking(move || run_turn(&app2.engine, &slot, &text))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map(Json)
}

async fn get_session(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<FrameSummary>, ApiError> {
    let slot = app
        .slot(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session `{id}`")))?;
    let session = slot
        .session
        .lock()
        .map_err(|_| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "session lock poisoned"))?;
    Ok(Json(FrameSummary {
        phase: session.frame.phase,
        turn_count: session.frame.turn_count,
        introduced_spots: session.frame.introduced_spots.clone(),
        theme: session.frame.theme,
        ended: session.ended,
    }))
}

fn cors_layer(origin: &str) -> CorsLayer {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    match HeaderValue::from_str(origin) {
        Ok(value) if origin != "*" => layer.allow_origin(AllowOrigin::exact(value)),
        _ => layer.allow_origin(Any),
    }
}

pub fn router(app: Arc<AppState>, cors_origin: &str) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/utterance", post(post_utterance))
        .route("/sessions/{id}", get(get_session))
        .layer(cors_layer(cors_origin))
        .with_state(app)
}

/// Builds the engine, binds the listener and serves until Ctrl-C. The bound
/// address is printed to stdout as `listening on <addr>`.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let setup = config.clone();
    let engine = tokio::task::spawn_blocking(move || setup.build_engine())
        .await
        .map_err(|e| ServiceError::Setup(e.to_string()))??;
    let app = Arc::new(AppState::new(Arc::new(engine), &config.log_dir, config.session_ttl)?);

    let sweeper = app.clone();
    let period = (config.session_ttl / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let evicted = sweeper.evict_idle(Instant::now());
            if evicted > 0 {
                info!(evicted, "idle sessions evicted");
            }
        }
    });

    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .map_err(|source| ServiceError::Io {
            context: format!("binding {}", config.listen),
            source,
        })?;
    let addr = listener.local_addr().map_err(|source| ServiceError::Io {
        context: "reading bound address".into(),
        source,
    })?;
    println!("listening on {addr}");
    info!(%addr, logs = %config.log_dir.display(), "service started");
    axum::serve(listener, router(app, &config.cors_origin))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| ServiceError::Io {
            context: "serving".into(),
            source,
        })
}
