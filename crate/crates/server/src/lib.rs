//! HTTP front end for the question-answering engine.
//!
//! Routes:
//! - `POST /ask` answers one question.
//! - `GET /kb/stats?qa_count=N` reports knowledge-base statistics.
//! - `POST /kb/reload` re-reads the configured directory.
//! - `GET /healthz` reports liveness and the published snapshot version.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kbqa_core::dialog::DialogError;
use kbqa_core::ranking::WeightsError;
use kbqa_core::store::compute_stats;
use kbqa_core::{AskRequest, Engine, EngineConfig, RankWeights, SnapshotStore};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("question is empty")]
    EmptyQuestion,
    #[error("knowledge base is still loading")]
    Loading,
    #[error("reload failed: {0}")]
    Reload(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::EmptyQuestion => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Loading => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Reload(_) | ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<DialogError> for ApiError {
    fn from(e: DialogError) -> Self {
        match e {
            DialogError::EmptyQuestion => ApiError::EmptyQuestion,
            DialogError::Unavailable => ApiError::Loading,
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Engine>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>) -> Self {
        Self { engine }
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.engine
    }
}

/// Body of `POST /ask`. Unknown fields are rejected.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AskBody {
    question: String,
    #[serde(default)]
    session_id: Option<String>,
    #[serde(default)]
    debug: bool,
    #[serde(default)]
    top_k_override: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct StatsQuery {
    qa_count: Option<u64>,
}

#[derive(Debug, Serialize)]
struct VersionBody {
    version: u64,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/ask", post(ask))
        .route("/kb/stats", get(stats))
        .route("/kb/reload", post(reload))
        .route("/healthz", get(healthz))
        .with_state(state)
}

async fn ask(State(state): State<AppState>, body: Result<Json<AskBody>, JsonRejection>) -> Result<Response, ApiError> {
    let Json(body) = body?;
    let req = AskRequest {
        question: body.question,
        session_id: body.session_id,
        top_k_override: body.top_k_override,
        debug: body.debug,
    };
    let engine = state.engine.clone();
    let response = tokio::task::spawn_blocking(move || engine.ask(&req))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(response).into_response())
}

async fn stats(
    State(state): State<AppState>,
    query: Result<Query<StatsQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(query) = query?;
    let kb = state.engine.store().load().ok_or(ApiError::Loading)?;
    let qa_count = query
        .qa_count
        .or(kb.documents().meta.qa_count)
        .ok_or_else(|| ApiError::BadRequest("qa_count is required for this knowledge base".into()))?;
    Ok(Json(compute_stats(kb.model(), qa_count)).into_response())
}

async fn reload(State(state): State<AppState>) -> Result<Json<VersionBody>, ApiError> {
    let store = state.engine.store().clone();
    let version = tokio::task::spawn_blocking(move || store.reload())
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(|e| ApiError::Reload(e.to_string()))?;
    Ok(Json(VersionBody { version }))
}

async fn healthz(State(state): State<AppState>) -> Response {
    match state.engine.store().version() {
        Some(v) => Json(json!({ "status": "ok", "kb_version": v })).into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "status": "loading", "kb_version": null })),
        )
            .into_response(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub kb_dir: PathBuf,
    pub port: u16,
    pub weights: Option<PathBuf>,
    pub engine: EngineConfig,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("KBQA_KB_DIR is not set and no knowledge-base directory was given")]
    MissingKbDir,
    #[error("invalid KBQA_PORT `{0}`")]
    BadPort(String),
}

impl ServerConfig {
    /// Fills unset values from `KBQA_KB_DIR`, `KBQA_PORT` and `KBQA_WEIGHTS`.
    pub fn from_env(kb_dir: Option<PathBuf>, port: Option<u16>, weights: Option<PathBuf>) -> Result<Self, ConfigError> {
        let var = |k: &str| std::env::var_os(k).filter(|v| !v.is_empty());
        let kb_dir = kb_dir
            .or_else(|| var("KBQA_KB_DIR").map(PathBuf::from))
            .ok_or(ConfigError::MissingKbDir)?;
        let port = match port {
            Some(p) => p,
            None => match var("KBQA_PORT") {
                Some(raw) => {
                    let raw = raw.to_string_lossy().into_owned();
                    raw.parse().map_err(|_| ConfigError::BadPort(raw))?
                }
                None => DEFAULT_PORT,
            },
        };
        let weights = weights.or_else(|| var("KBQA_WEIGHTS").map(PathBuf::from));
        Ok(Self {
            kb_dir,
            port,
            weights,
            engine: EngineConfig::default(),
        })
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Engine(#[from] DialogError),
    #[error("cannot bind port {port}: {source}")]
    Bind {
        port: u16,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Builds an engine over an unloaded store for `config`.
pub fn build_engine(config: &ServerConfig) -> Result<Arc<Engine>, ServeError> {
    let weights = match &config.weights {
        Some(path) => RankWeights::from_json_file(path)?,
        None => RankWeights::default(),
    };
    let store = Arc::new(SnapshotStore::unloaded(&config.kb_dir));
    Ok(Arc::new(Engine::new(store, weights, config.engine.clone())?))
}

/// Binds the port and serves until ctrl-c. Requests get 503 until the
/// first load finishes; if that load fails the error is printed and the
/// server keeps answering 503 until a successful `/kb/reload`.
pub async fn serve(config: ServerConfig) -> Result<(), ServeError> {
    let engine = build_engine(&config)?;
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind {
            port: config.port,
            source,
        })?;
    let store = engine.store().clone();
    tokio::task::spawn_blocking(move || {
        if let Err(e) = store.reload() {
            eprintln!("initial load failed: {e}");
        }
    });
    axum::serve(listener, router(AppState::new(engine)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
