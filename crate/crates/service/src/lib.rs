//! HTTP front end for nine-grid preference studies.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/studies` | load a bundle: `{"bundle_path": ..}` |
//! | POST | `/studies/{id}/sessions` | start a session |
//! | GET | `/studies/{id}/tally` | counts and summary statistics |
//! | GET | `/sessions/{sid}` | session state, for resuming |
//! | GET | `/sessions/{sid}/questions/{n}` | the four options of question `n` |
//! | POST | `/sessions/{sid}/answers` | `{"question_index": n, "slot": 1..4}` |
//! | GET | `/media/{id}/{path}` | composite PNGs |
//!
//! Errors are `{"code": .., "message": ..}` with a matching status.

pub mod error;
pub mod registry;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

pub use error::{ApiError, ApiResult};
pub use registry::Registry;

#[derive(Debug, Clone)]
pub struct Config {
    pub bind: SocketAddr,
    pub data_dir: PathBuf,
    /// Bundles loaded before the listener opens.
    pub preload: Vec<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct LoadStudy {
    bundle_path: PathBuf,
}

#[derive(Debug, Deserialize)]
struct Answer {
    question_index: usize,
    slot: i64,
}

type AppState = Arc<Registry>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::BadRequest(e.body_text()))
}

async fn load_study(
    State(reg): State<AppState>,
    payload: Result<Json<LoadStudy>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let req = body(payload)?;
    let info = tokio::task::spawn_blocking(move || reg.load_study(&req.bundle_path))
        .await
        .expect("load task panicked")?;
    Ok(Json(info))
}

async fn create_session(
    State(reg): State<AppState>,
    Path(study_id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok((StatusCode::CREATED, Json(reg.create_session(&study_id)?)))
}

async fn get_session(
    State(reg): State<AppState>,
    Path(session_id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(reg.session(&session_id)?))
}

async fn get_question(
    State(reg): State<AppState>,
    Path((session_id, n)): Path<(String, usize)>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(reg.question(&session_id, n)?))
}

async fn post_answer(
    State(reg): State<AppState>,
    Path(session_id): Path<String>,
    payload: Result<Json<Answer>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let req = body(payload)?;
    let ack =
        tokio::task::spawn_blocking(move || reg.answer(&session_id, req.question_index, req.slot))
            .await
            .expect("answer task panicked")?;
    Ok(Json(ack))
}

async fn get_tally(
    State(reg): State<AppState>,
    Path(study_id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(reg.tally(&study_id)?))
}

async fn media(
    State(reg): State<AppState>,
    Path((study_id, rel)): Path<(String, String)>,
) -> ApiResult<Response> {
    let path = reg.media_path(&study_id, &rel)?;
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| ninegrid::Error::NotFound(rel.clone()))?;
    Ok((
        [
            (header::CONTENT_TYPE, "image/png"),
            (header::CACHE_CONTROL, "public, max-age=31536000, immutable"),
        ],
        bytes,
    )
        .into_response())
}

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/studies", post(load_study))
        .route("/studies/{id}/sessions", post(create_session))
        .route("/studies/{id}/tally", get(get_tally))
        .route("/sessions/{sid}", get(get_session))
        .route("/sessions/{sid}/questions/{n}", get(get_question))
        .route("/sessions/{sid}/answers", post(post_answer))
        .route("/media/{id}/{*path}", get(media))
        .with_state(registry)
}

/// Binds, prints `listening on http://<addr>` to stdout, and serves until ctrl-c.
pub async fn serve(config: Config) -> ApiResult<()> {
    let io = |e: std::io::Error| ApiError::Core(e.into());
    let registry = Arc::new(Registry::open(&config.data_dir)?);
    for path in &config.preload {
        registry.load_study(path)?;
    }
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(io)?;
    let addr = listener.local_addr().map_err(io)?;
    println!("listening on http://{addr}");
    use std::io::Write as _;
    std::io::stdout().flush().map_err(io)?;
    axum::serve(listener, router(registry))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(io)
}
