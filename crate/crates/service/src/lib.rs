//! HTTP API for interactive summarization sessions.
//!
//! Sessions live in memory behind a per-session lock and are persisted as an
//! append-only event log under the data directory. A server started on the
//! same directory picks sessions up again by replaying their logs on first
//! access.

mod engine;
mod error;
mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use persum_core::config::EngineConfig;
use persum_core::corpus::ConceptUnit;
use serde::Deserialize;
use serde_json::{json, Value};
use uuid::Uuid;

pub use engine::{FeedbackBody, Status};
pub use error::{ApiError, FieldError};
pub use store::{Mode, SessionMeta};

use engine::{Corpora, Live};
use error::Body;
use store::Store;

pub const SCHEMA_VERSION: u32 = 1;

type Slot = Arc<Mutex<Option<Live>>>;

pub struct AppState {
    cfg: EngineConfig,
    store: Store,
    corpora: Corpora,
    sessions: Mutex<HashMap<Uuid, Slot>>,
}

impl AppState {
    pub fn new(cfg: EngineConfig, data_dir: &Path) -> Self {
        Self {
            cfg,
            store: Store::new(data_dir),
            corpora: Corpora::new(data_dir),
            sessions: Mutex::new(HashMap::new()),
        }
    }

    /// Reads `PERSUM_CONFIG` (a TOML file) and `PERSUM_DATA_DIR`
    /// (default `./persum-data`).
    pub fn from_env() -> Result<Self, persum_core::config::ConfigError> {
        let cfg = EngineConfig::from_env()?;
        let dir = std::env::var_os("PERSUM_DATA_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("persum-data"));
        Ok(Self::new(cfg, &dir))
    }

    /// Runs `f` with exclusive access to a session, restoring it from disk
    /// if this process has not seen it yet.
    fn with_session<T>(&self, id: &str, f: impl FnOnce(&mut Live, &Store) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let unknown = || ApiError::not_found(format!("no session `{id}`"));
        let id = Uuid::parse_str(id).map_err(|_| unknown())?;
        let slot = self.sessions.lock().expect("session table").entry(id).or_default().clone();
        let mut guard = slot.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            if !self.store.exists(id) {
                drop(guard);
                self.sessions.lock().expect("session table").remove(&id);
                return Err(unknown());
            }
            let meta = self.store.meta(id)?;
            let loaded = self.corpora.get(&meta.corpus_id, &meta.config)?;
            *guard = Some(Live::restore(&self.store, meta, loaded)?);
        }
        f(guard.as_mut().expect("restored above"), &self.store)
    }

    fn create(&self, req: CreateSession) -> Result<Value, ApiError> {
        let mut cfg = self.cfg.clone();
        if let Some(b) = req.budget {
            if b == 0 {
                return Err(ApiError::field("budget", "must be positive"));
            }
            cfg.budget = b;
        }
        if let Some(u) = req.unit {
            cfg.unit = u;
        }
        if let Some(s) = req.seed {
            cfg.seed = s;
        }
        let loaded = self.corpora.get(&req.corpus_id, &cfg)?;
        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let meta = SessionMeta {
            schema_version: SCHEMA_VERSION,
            session_id: Uuid::new_v4(),
            mode: req.mode,
            corpus_id: req.corpus_id,
            created_at,
            config: cfg,
        };
        let live = Live::start(meta.clone(), loaded)?;
        self.store.create(&meta)?;
        let status = live.status();
        self.sessions
            .lock()
            .expect("session table")
            .insert(meta.session_id, Arc::new(Mutex::new(Some(live))));
        log::info!("created {:?} session {} on {}", meta.mode, meta.session_id, meta.corpus_id);
        Ok(json!({
            "schema_version": SCHEMA_VERSION,
            "session_id": meta.session_id,
            "mode": meta.mode,
            "status": status,
        }))
    }

    fn summarize(&self, req: SummarizeRequest) -> Result<Value, ApiError> {
        let mut cfg = self.cfg.clone();
        if let Some(b) = req.budget {
            if b == 0 {
                return Err(ApiError::field("budget", "must be positive"));
            }
            cfg.budget = b;
        }
        let loaded = self.corpora.get(&req.corpus_id, &cfg)?;
        engine::one_shot(&loaded, &req.corpus_id, &cfg)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    mode: Mode,
    corpus_id: String,
    #[serde(default)]
    budget: Option<usize>,
    #[serde(default)]
    unit: Option<ConceptUnit>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummarizeRequest {
    corpus_id: String,
    #[serde(default)]
    budget: Option<usize>,
}

type Shared = State<Arc<AppState>>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

async fn healthz() -> Json<Value> {
    Json(json!({"schema_version": SCHEMA_VERSION, "status": "ok"}))
}

async fn create_session(State(app): Shared, Body(req): Body<CreateSession>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let v = blocking(move || app.create(req)).await?;
    Ok((StatusCode::CREATED, Json(v)))
}

async fn get_query(State(app): Shared, UrlPath(id): UrlPath<String>) -> Result<Json<Value>, ApiError> {
    blocking(move || app.with_session(&id, |live, _| live.query_view())).await.map(Json)
}

async fn post_feedback(
    State(app): Shared,
    UrlPath(id): UrlPath<String>,
    Body(body): Body<FeedbackBody>,
) -> Result<Json<Value>, ApiError> {
    blocking(move || app.with_session(&id, |live, store| live.feedback(store, body)))
        .await
        .map(Json)
}

async fn get_summary(State(app): Shared, UrlPath(id): UrlPath<String>) -> Result<Json<Value>, ApiError> {
    blocking(move || app.with_session(&id, |live, _| live.summary_view())).await.map(Json)
}

async fn post_summarize(State(app): Shared, Body(req): Body<SummarizeRequest>) -> Result<Json<Value>, ApiError> {
    blocking(move || app.summarize(req)).await.map(Json)
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such route")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/query", get(get_query))
        .route("/sessions/{id}/feedback", post(post_feedback))
        .route("/sessions/{id}/summary", get(get_summary))
        .route("/summarize", post(post_summarize))
        .fallback(fallback)
        .with_state(state)
}

/// Serves the API until the process is stopped.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
