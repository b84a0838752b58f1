//! HTTP sink for the blur experiment: session event logs, blur schedules
//! and the static UI.
//!
//! Layout under the data directory:
//! `sessions/<id>.events.jsonl` and `sessions/<id>.schedule.json`.

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Deserialize;
use tokio::io::AsyncWriteExt;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;
use verge_core::annotate::{make_schedule, LogEvent};
use verge_core::dataset::derive_seed;

pub const BIND_ENV: &str = "VERGE_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_VIDEO_MS: f64 = 300_000.0;
pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct CollectorConfig {
    pub data_dir: PathBuf,
    /// Served at `/` when present.
    pub assets_dir: Option<PathBuf>,
    /// Base for per-session schedule seeds.
    pub seed: u64,
}

/// `VERGE_BIND` if set, otherwise the loopback default.
pub fn bind_from_env() -> String {
    std::env::var(BIND_ENV).unwrap_or_else(|_| DEFAULT_BIND.to_string())
}

#[derive(Clone)]
struct AppState {
    config: Arc<CollectorConfig>,
    locks: Arc<Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>>,
}

impl AppState {
    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table poisoned")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    fn session_path(&self, id: &str, suffix: &str) -> PathBuf {
        self.config.data_dir.join("sessions").join(format!("{id}.{suffix}"))
    }
}

/// Ids become file names, so only a conservative alphabet is accepted.
pub fn valid_session_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

pub fn router(config: CollectorConfig) -> Router {
    let assets = config.assets_dir.clone();
    let state = AppState {
        config: Arc::new(config),
        locks: Arc::default(),
    };
    let app = Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/api/sessions/{id}/events", post(post_events))
        .route("/api/sessions/{id}/schedule", get(get_schedule))
        .with_state(state);
    match assets {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

/// Serve until the listener fails.
pub async fn serve(listener: TcpListener, config: CollectorConfig) -> io::Result<()> {
    tokio::fs::create_dir_all(config.data_dir.join("sessions")).await?;
    axum::serve(listener, router(config)).await
}

/// Bind `addr` and serve on a fresh runtime; blocks.
pub fn run(addr: &str, config: CollectorConfig) -> io::Result<()> {
    let addr: SocketAddr = addr
        .parse()
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, format!("bind address {addr:?}: {e}")))?;
    tokio::runtime::Runtime::new()?.block_on(async {
        let listener = TcpListener::bind(addr).await?;
        serve(listener, config).await
    })
}

fn bad_request(msg: String) -> Response {
    (StatusCode::BAD_REQUEST, msg).into_response()
}

fn internal(e: io::Error) -> Response {
    (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response()
}

/// Every line must parse and name this session; all lines are then
/// appended with one write, or none are.
async fn post_events(State(st): State<AppState>, UrlPath(id): UrlPath<String>, body: String) -> Response {
    if !valid_session_id(&id) {
        return bad_request(format!("invalid session id {id:?}"));
    }
    let mut out = String::new();
    for (i, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match LogEvent::parse(line) {
            Ok(e) if e.session == id => {}
            Ok(e) => return bad_request(format!("line {}: session {:?} does not match {id:?}", i + 1, e.session)),
            Err(msg) => return bad_request(format!("line {}: {msg}", i + 1)),
        }
        out.push_str(line);
        out.push('\n');
    }
    if out.is_empty() {
        return bad_request("no events".into());
    }

    let lock = st.lock_for(&id);
    let _guard = lock.lock().await;
    let path = st.session_path(&id, "events.jsonl");
    let write = async {
        tokio::fs::create_dir_all(path.parent().expect("session dir")).await?;
        let mut f = tokio::fs::OpenOptions::new().create(true).append(true).open(&path).await?;
        f.write_all(out.as_bytes()).await?;
        f.sync_data().await
    };
    match write.await {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => internal(e),
    }
}

#[derive(Debug, Deserialize)]
struct ScheduleQuery {
    alpha: Option<f64>,
    duration_ms: Option<f64>,
}

fn json(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

/// The first request fixes the schedule; repeats with the same parameters
/// get the stored bytes, different parameters get 409.
async fn get_schedule(State(st): State<AppState>, UrlPath(id): UrlPath<String>, Query(q): Query<ScheduleQuery>) -> Response {
    if !valid_session_id(&id) {
        return bad_request(format!("invalid session id {id:?}"));
    }
    let alpha = q.alpha.unwrap_or(DEFAULT_ALPHA);
    let duration = q.duration_ms.unwrap_or(DEFAULT_VIDEO_MS);
    let schedule = match make_schedule(&id, duration, alpha, derive_seed(st.config.seed, &id)) {
        Ok(s) => s,
        Err(e) => return bad_request(e.to_string()),
    };

    let bytes = schedule.to_json().into_bytes();

    let lock = st.lock_for(&id);
    let _guard = lock.lock().await;
    let path = st.session_path(&id, "schedule.json");
    match tokio::fs::read(&path).await {
        Ok(existing) if existing == bytes => json(bytes),
        Ok(_) => (StatusCode::CONFLICT, format!("session {id:?} already has a different schedule")).into_response(),
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            let write = async {
                tokio::fs::create_dir_all(path.parent().expect("session dir")).await?;
                tokio::fs::write(&path, &bytes).await
            };
            match write.await {
                Ok(()) => json(bytes),
                Err(e) => internal(e),
            }
        }
        Err(e) => internal(e),
    }
}
