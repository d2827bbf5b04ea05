//! HTTP ask-tell service over [`mixbo::driver`].
//!
//! | method | path | body | success |
//! |---|---|---|---|
//! | POST | `/v1/sessions` | `{"version": 1, "config": <RunConfig>}` | 201 [`CreateResponse`] |
//! | GET | `/v1/sessions/{id}` | | 200 [`StatusResponse`] |
//! | GET | `/v1/sessions/{id}/ask` | | 200 [`AskResponse`] |
//! | POST | `/v1/sessions/{id}/tell` | [`TellRequest`] | 200 [`TellResponse`] |
//! | GET | `/v1/sessions/{id}/results[?force=true]` | | 200 [`ResultsResponse`] |
//! | GET | `/v1/sessions/{id}/history` | | 200 history CSV |
//!
//! Errors are [`ErrorBody`] with 400 (malformed body), 404 (unknown
//! session), 409 (pending ask, token mismatch, unfinished results), 410
//! (budget reached, with result links) or 422 (wrong `f`/`g` arity).
//!
//! Each session lives in its own directory under the data directory and is
//! reloaded from its event log at startup. Requests on one session are
//! serialized by a per-session lock; sessions proceed independently.

pub mod error;
pub mod session;
pub mod wire;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};
use serde::de::DeserializeOwned;
use serde::Deserialize;

pub use error::ApiError;
pub use session::Session;
pub use wire::*;

pub const PORT_ENV: &str = "MIXBO_PORT";
pub const DATA_DIR_ENV: &str = "MIXBO_DATA_DIR";
pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_DATA_DIR: &str = "mixbo-data";

type Shared = Arc<Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    data_dir: Arc<PathBuf>,
    sessions: Arc<RwLock<HashMap<String, Shared>>>,
}

impl AppState {
    /// Opens `data_dir`, replaying every session found in it. Unreadable
    /// sessions are skipped with a warning.
    pub fn open(data_dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let data_dir = data_dir.into();
        std::fs::create_dir_all(&data_dir)?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(&data_dir)? {
            let path = entry?.path();
            if !path.join(session::EVENTS_FILE).is_file() {
                continue;
            }
            match Session::load(&path) {
                Ok(s) => {
                    log::info!("restored session {} ({} evaluations)", s.id(), s.run().history().len());
                    sessions.insert(s.id().to_string(), Arc::new(Mutex::new(s)));
                }
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(Self {
            data_dir: Arc::new(data_dir),
            sessions: Arc::new(RwLock::new(sessions)),
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    fn get(&self, id: &str) -> Result<Shared, ApiError> {
        self.sessions.read().get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(status))
        .route("/v1/sessions/{id}/ask", get(ask))
        .route("/v1/sessions/{id}/tell", post(tell))
        .route("/v1/sessions/{id}/results", get(get_results))
        .route("/v1/sessions/{id}/history", get(history))
        .with_state(state)
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn check_version(v: u32) -> Result<(), ApiError> {
    if v == VERSION {
        Ok(())
    } else {
        Err(ApiError::bad_request(format!("unsupported version {v}, expected {VERSION}")))
    }
}

/// Runs `f` on the locked session off the async workers: asks refit
/// surrogates and can take seconds.
async fn with_session<T, F>(state: &AppState, id: &str, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut Session) -> Result<T, ApiError> + Send + 'static,
{
    let shared = state.get(id)?;
    tokio::task::spawn_blocking(move || f(&mut shared.lock()))
        .await
        .map_err(|e| ApiError::internal(format!("handler panicked: {e}")))?
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = parse(&body)?;
    check_version(req.version)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let dir = state.data_dir.to_path_buf();
    let session = tokio::task::spawn_blocking(move || Session::create(&dir, id, req.config))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    let cfg = session.run().config();
    let resp = CreateResponse {
        version: VERSION,
        id: session.id().to_string(),
        relaxed_dimension: cfg.space.relaxed_dimension(),
        phase: session.run().phase(),
        doe_size: cfg.doe_size,
        budget: cfg.budget,
        links: session.links(),
    };
    log::info!("created session {} (d'={})", resp.id, resp.relaxed_dimension);
    state.sessions.write().insert(resp.id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(resp)).into_response())
}

async fn status(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<StatusResponse>, ApiError> {
    with_session(&state, &id, |s| Ok(s.status())).await.map(Json)
}

async fn ask(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<AskResponse>, ApiError> {
    with_session(&state, &id, |s| s.ask()).await.map(Json)
}

async fn tell(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<TellResponse>, ApiError> {
    state.get(&id)?;
    let req: TellRequest = parse(&body)?;
    check_version(req.version)?;
    with_session(&state, &id, move |s| s.tell(req)).await.map(Json)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResultsQuery {
    #[serde(default)]
    force: bool,
}

async fn get_results(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    query: Result<Query<ResultsQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Json<ResultsResponse>, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    with_session(&state, &id, move |s| s.results(q.force)).await.map(Json)
}

async fn history(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let csv = with_session(&state, &id, |s| s.history_csv()).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv).into_response())
}

/// Port and data directory from the environment, with defaults.
pub fn env_config() -> Result<(u16, PathBuf), String> {
    let port = match std::env::var(PORT_ENV) {
        Ok(v) => v.parse().map_err(|_| format!("{PORT_ENV}: invalid port `{v}`"))?,
        Err(_) => DEFAULT_PORT,
    };
    let dir = std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from(DEFAULT_DATA_DIR), PathBuf::from);
    Ok((port, dir))
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, data_dir: PathBuf) -> std::io::Result<()> {
    let state = AppState::open(data_dir)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!(
        "listening on {} (data dir {}, {} sessions)",
        listener.local_addr()?,
        state.data_dir().display(),
        state.session_ids().len()
    );
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
