//! HTTP routes.
//!
//! | method | path                          | body / query            |
//! |--------|-------------------------------|-------------------------|
//! | GET    | `/healthz`                    |                         |
//! | GET    | `/api/models`                 |                         |
//! | POST   | `/api/sessions`               | `{model, seed?, params?}` |
//! | GET    | `/api/sessions/{id}`          |                         |
//! | POST   | `/api/sessions/{id}/params`   | `{key: value, ...}`     |
//! | POST   | `/api/sessions/{id}/run`      | `{frames?}`             |
//! | POST   | `/api/sessions/{id}/pause`    |                         |
//! | POST   | `/api/sessions/{id}/reset`    |                         |
//! | GET    | `/api/sessions/{id}/stream`   | `?from=TICK`            |
//! | DELETE | `/api/sessions/{id}`          |                         |
//!
//! The stream is Server-Sent Events. `frame` events carry a
//! [`FrameMessage`](crate::wire::FrameMessage) as JSON, replaying recorded
//! ticks from `from` and then following the run. A `reset` event with
//! `{"epoch": n}` announces a reset; frames restart at tick 0.

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::stream::{self, Stream};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use abm::gallery::{self, GalleryModel};
use abm::Error;

use crate::session::Session;
use crate::wire::{CreateSession, ModelDescription, RunRequest};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Pause after each streamed step.
    pub step_delay: Duration,
    /// Models offered; all gallery models when empty.
    pub models: Vec<String>,
    /// Directory served at `/`; the built-in page when `None`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            step_delay: Duration::from_millis(50),
            models: Vec::new(),
            static_dir: None,
        }
    }
}

pub struct AppState {
    config: ServiceConfig,
    sessions: RwLock<HashMap<u64, Arc<Session>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Arc<AppState>, Error> {
        for m in &config.models {
            gallery::lookup(m)?;
        }
        Ok(Arc::new(AppState {
            config,
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }))
    }

    fn offered(&self) -> Vec<&'static dyn GalleryModel> {
        gallery::all()
            .into_iter()
            .filter(|m| self.config.models.is_empty() || self.config.models.iter().any(|n| n == m.name()))
            .collect()
    }

    fn session(&self, id: u64) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(&id)
            .cloned()
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no session {id}")))
    }

    /// Stops every session worker.
    pub fn shutdown(&self) {
        let mut sessions = self.sessions.write().unwrap_or_else(|p| p.into_inner());
        for (_, s) in sessions.drain() {
            s.close();
        }
    }
}

#[derive(Debug)]
pub struct ApiError(pub StatusCode, pub String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::UnknownModel { .. } | Error::UnknownParam { .. } | Error::InvalidArgument(_) => {
                StatusCode::BAD_REQUEST
            }
            Error::WrongType { .. } | Error::TypeChange { .. } | Error::Parse { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

const INDEX_HTML: &str = include_str!("../static/index.html");
const APP_JS: &str = include_str!("../static/app.js");

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/api/models", get(list_models))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(session_info).delete(delete_session))
        .route("/api/sessions/{id}/params", post(set_params))
        .route("/api/sessions/{id}/run", post(run))
        .route("/api/sessions/{id}/pause", post(pause))
        .route("/api/sessions/{id}/reset", post(reset))
        .route("/api/sessions/{id}/stream", get(stream_session));
    let api = match &state.config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api
            .route("/", get(|| async { ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], INDEX_HTML) }))
            .route(
                "/app.js",
                get(|| async { ([(header::CONTENT_TYPE, "text/javascript; charset=utf-8")], APP_JS) }),
            ),
    };
    api.with_state(state)
}

async fn list_models(State(state): State<Arc<AppState>>) -> Json<Vec<ModelDescription>> {
    Json(state.offered().into_iter().map(ModelDescription::of).collect())
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(req): Json<CreateSession>,
) -> ApiResult<(StatusCode, Json<crate::wire::SessionInfo>)> {
    let entry = state
        .offered()
        .into_iter()
        .find(|m| m.name() == req.model)
        .ok_or_else(|| {
            ApiError::from(Error::UnknownModel {
                name: req.model.clone(),
                available: state.offered().iter().map(|m| m.name()).collect::<Vec<_>>().join(", "),
            })
        })?;
    let id = state.next_id.fetch_add(1, Ordering::Relaxed);
    let seed = req.seed.unwrap_or(abm::DEFAULT_SEED);
    let step_delay = state.config.step_delay;
    let params = req.params.clone();
    let (session, _worker) =
        tokio::task::spawn_blocking(move || Session::start(id, entry, seed, &params, step_delay))
            .await
            .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let info = session.info();
    state.sessions.write().unwrap_or_else(|p| p.into_inner()).insert(id, session);
    Ok((StatusCode::CREATED, Json(info)))
}

async fn session_info(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<crate::wire::SessionInfo>> {
    Ok(Json(state.session(id)?.info()))
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<StatusCode> {
    let s = state
        .sessions
        .write()
        .unwrap_or_else(|p| p.into_inner())
        .remove(&id)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no session {id}")))?;
    s.close();
    Ok(StatusCode::NO_CONTENT)
}

async fn set_params(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Json(values): Json<serde_json::Map<String, serde_json::Value>>,
) -> ApiResult<Json<serde_json::Value>> {
    let s = state.session(id)?;
    let applied = s.set_params(&values)?;
    let info = s.info();
    Ok(Json(json!({ "applied": applied, "pending_reset": info.pending_reset })))
}

async fn run(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
    body: Option<Json<RunRequest>>,
) -> ApiResult<Json<crate::wire::SessionInfo>> {
    let s = state.session(id)?;
    s.run(body.and_then(|b| b.0.frames))?;
    Ok(Json(s.info()))
}

async fn pause(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<crate::wire::SessionInfo>> {
    let s = state.session(id)?;
    s.pause();
    Ok(Json(s.info()))
}

async fn reset(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<crate::wire::SessionInfo>> {
    let s = state.session(id)?;
    let s2 = Arc::clone(&s);
    tokio::task::spawn_blocking(move || s2.reset())
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(s.info()))
}

#[derive(Debug, Default, Deserialize)]
struct StreamQuery {
    #[serde(default)]
    from: u64,
}

struct Cursor {
    session: Arc<Session>,
    rx: tokio::sync::watch::Receiver<crate::session::Progress>,
    epoch: u64,
    next: u64,
}

async fn stream_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Query(q): Query<StreamQuery>,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let session = state.session(id)?;
    let rx = session.subscribe();
    let epoch = session.live().epoch;
    let cursor = Cursor {
        session,
        rx,
        epoch,
        next: q.from,
    };
    Ok(Sse::new(stream::unfold(cursor, next_event)).keep_alive(KeepAlive::default()))
}

async fn next_event(mut c: Cursor) -> Option<(Result<Event, Infallible>, Cursor)> {
    loop {
        let p = *c.rx.borrow_and_update();
        if p.closed {
            return None;
        }
        if p.epoch != c.epoch {
            c.epoch = p.epoch;
            c.next = 0;
            let ev = Event::default().event("reset").data(json!({ "epoch": p.epoch }).to_string());
            return Some((Ok(ev), c));
        }
        if c.next <= p.tick {
            let session = Arc::clone(&c.session);
            let (epoch, tick) = (c.epoch, c.next);
            let msg = tokio::task::spawn_blocking(move || session.message(epoch, tick)).await;
            match msg {
                Ok(Ok(Some(m))) => {
                    c.next += 1;
                    let ev = Event::default()
                        .event("frame")
                        .id(format!("{}:{}", m.epoch, m.tick))
                        .data(serde_json::to_string(&m).unwrap_or_default());
                    return Some((Ok(ev), c));
                }
                // the epoch moved on while building; pick it up next round
                Ok(Ok(None)) => continue,
                Ok(Err(e)) => {
                    let ev = Event::default().event("error").data(json!({ "error": e.to_string() }).to_string());
                    return Some((Ok(ev), c));
                }
                Err(_) => return None,
            }
        }
        if c.rx.changed().await.is_err() {
            return None;
        }
    }
}
