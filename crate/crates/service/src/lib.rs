//! HTTP/JSON reward service.
//!
//! The case store and verifier are immutable after startup, so handlers share
//! them through an `Arc` without locking. Scoring runs on the blocking pool
//! (it fans out with rayon inside `score_request`).

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cikit_core::api::{score_request, CaseView, ErrorBody, HealthResponse, RewardRequest, RewardResponse};
use cikit_core::cases::CaseStore;
use cikit_core::verifier::{Verifier, VerifierConfig};
use serde::Deserialize;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ServiceConfig {
    /// Allow `?include_gold=true` on the case endpoint.
    pub expose_gold: bool,
    pub verifier: VerifierConfig,
}

struct AppState {
    store: CaseStore,
    verifier: Verifier,
    expose_gold: bool,
}

type Shared = Arc<AppState>;

pub fn router(store: CaseStore, config: ServiceConfig) -> Router {
    let state = Arc::new(AppState { store, verifier: Verifier::new(config.verifier), expose_gold: config.expose_gold });
    Router::new()
        .route("/v1/reward", post(reward))
        .route("/v1/cases/{id}", get(case))
        .route("/v1/health", get(health))
        .with_state(state)
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: msg.into() })).into_response()
}

async fn reward(State(state): State<Shared>, body: Result<Json<RewardRequest>, JsonRejection>) -> Response {
    let Json(request) = match body {
        Ok(b) => b,
        Err(rej) => return error(rej.status(), rej.body_text()),
    };
    let n = request.items.len();
    let scored = tokio::task::spawn_blocking(move || score_request(&state.store, &state.verifier, &request)).await;
    match scored {
        Ok(resp) => {
            tracing::debug!(items = n, mean = ?resp.summary.mean_reward, "scored batch");
            Json::<RewardResponse>(resp).into_response()
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("scoring task failed: {e}")),
    }
}

#[derive(Debug, Default, Deserialize)]
struct CaseQuery {
    #[serde(default)]
    include_gold: bool,
}

async fn case(State(state): State<Shared>, Path(id): Path<String>, Query(q): Query<CaseQuery>) -> Response {
    if q.include_gold && !state.expose_gold {
        return error(StatusCode::FORBIDDEN, "gold labels are not exposed by this service");
    }
    match state.store.get(&id) {
        Some(c) => Json(CaseView::of(c, q.include_gold)).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown case `{id}`")),
    }
}

async fn health(State(state): State<Shared>) -> Json<HealthResponse> {
    Json(HealthResponse { status: "ok".into(), cases: state.store.len() })
}

pub async fn bind(addr: &str) -> Result<TcpListener, ServiceError> {
    TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind { addr: addr.to_string(), source })
}

/// A server running on a background task; dropping the handle does not stop it.
pub struct ServiceHandle {
    pub local_addr: SocketAddr,
    shutdown: oneshot::Sender<()>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServiceHandle {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.local_addr)
    }

    pub async fn shutdown(self) -> Result<(), ServiceError> {
        let _ = self.shutdown.send(());
        match self.task.await {
            Ok(r) => r.map_err(ServiceError::Io),
            Err(e) => Err(ServiceError::Io(std::io::Error::other(e))),
        }
    }
}

/// Binds `addr` (port 0 picks a free port) and serves in the background.
pub async fn spawn(store: CaseStore, config: ServiceConfig, addr: &str) -> Result<ServiceHandle, ServiceError> {
    let listener = bind(addr).await?;
    let local_addr = listener.local_addr()?;
    let app = router(store, config);
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    Ok(ServiceHandle { local_addr, shutdown: tx, task })
}

/// Serves until Ctrl-C.
pub async fn serve(store: CaseStore, config: ServiceConfig, addr: &str) -> Result<(), ServiceError> {
    let listener = bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, cases = store.len(), "reward service listening");
    axum::serve(listener, router(store, config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
