//! Axum routes over [`Service`].

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use mediflow_auth::TokenError;
use mediflow_core::wire::{
    DecisionRequest, DecisionResponse, HealthResponse, HistoryResponse, IndexRequest, IndexResponse, LimitsRequest,
    LimitsResponse, LoginRequest, LoginResponse, ProposalRequest, StatusResponse, TokenResponse,
};
use mediflow_core::{AdjustmentProposal, InfusionRecord};
use tokio::net::TcpListener;

use crate::error::{ApiError, ApiResult};
use crate::service::Service;

type Shared = State<Arc<Service>>;

fn bearer(headers: &HeaderMap) -> ApiResult<String> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(|t| t.trim().to_owned())
        .filter(|t| !t.is_empty())
        .ok_or(ApiError::Token(TokenError::Invalid))
}

fn body<T>(json: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    json.map(|Json(v)| v).map_err(|_| ApiError::BadRequest("bad_request"))
}

async fn health(State(svc): Shared) -> Json<HealthResponse> {
    Json(HealthResponse {
        status: "ok".into(),
        poll_interval_s: svc.config().poll_interval_s,
    })
}

async fn login(State(svc): Shared, req: Result<Json<LoginRequest>, JsonRejection>) -> ApiResult<Json<LoginResponse>> {
    let req = body(req)?;
    svc.login(&req).map(Json)
}

async fn index(
    State(svc): Shared,
    headers: HeaderMap,
    req: Result<Json<IndexRequest>, JsonRejection>,
) -> ApiResult<Json<IndexResponse>> {
    let token = bearer(&headers)?;
    let req = body(req)?;
    svc.get_index(&token, &req).map(Json)
}

async fn infusions(
    State(svc): Shared,
    headers: HeaderMap,
    req: Result<Json<InfusionRecord>, JsonRejection>,
) -> ApiResult<Json<TokenResponse>> {
    let token = bearer(&headers)?;
    let record = body(req)?;
    svc.record_infusion(&token, record).map(Json)
}

async fn history(State(svc): Shared, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<Json<HistoryResponse>> {
    let token = bearer(&headers)?;
    svc.history(&token, &id).map(Json)
}

async fn status(State(svc): Shared, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<Json<StatusResponse>> {
    let token = bearer(&headers)?;
    svc.status(&token, &id).map(Json)
}

async fn limits(
    State(svc): Shared,
    headers: HeaderMap,
    Path(id): Path<String>,
    req: Result<Json<LimitsRequest>, JsonRejection>,
) -> ApiResult<Json<LimitsResponse>> {
    let token = bearer(&headers)?;
    let req = body(req)?;
    svc.set_limits(&token, &id, &req).map(Json)
}

async fn propose(
    State(svc): Shared,
    req: Result<Json<ProposalRequest>, JsonRejection>,
) -> ApiResult<Json<AdjustmentProposal>> {
    let req = body(req)?;
    svc.propose_adjustment(&req).map(Json)
}

async fn decide(
    State(svc): Shared,
    headers: HeaderMap,
    Path(id): Path<String>,
    req: Result<Json<DecisionRequest>, JsonRejection>,
) -> ApiResult<Json<DecisionResponse>> {
    let token = bearer(&headers)?;
    let req = body(req)?;
    svc.decide_adjustment(&token, &id, &req).map(Json)
}

fn content_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

/// Static dashboard files from `app_dir`; `..` segments are refused.
async fn app_file(State(svc): Shared, path: Option<Path<String>>) -> axum::response::Response {
    let Some(root) = svc.config().app_dir.clone() else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let rel = path.map(|Path(p)| p).unwrap_or_default();
    let rel = if rel.is_empty() || rel.ends_with('/') {
        format!("{rel}index.html")
    } else {
        rel
    };
    let rel = std::path::Path::new(&rel);
    if rel.components().any(|c| !matches!(c, std::path::Component::Normal(_))) {
        return StatusCode::NOT_FOUND.into_response();
    }
    let full = root.join(rel);
    match tokio::fs::read(&full).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&full))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/api/login", post(login))
        .route("/api/index", post(index))
        .route("/api/infusions", post(infusions))
        .route("/api/patients/{id}/history", get(history))
        .route("/api/patients/{id}/status", get(status))
        .route("/api/patients/{id}/limits", post(limits))
        .route("/api/proposals", post(propose))
        .route("/api/proposals/{id}/decision", post(decide))
        .route("/app", get(app_file))
        .route("/app/", get(app_file))
        .route("/app/{*path}", get(app_file))
        .with_state(service)
}

/// Serves until `shutdown` resolves, purging expired tokens once per TTL.
/// Writes a journal snapshot after a clean stop.
pub async fn serve(
    listener: TcpListener,
    service: Arc<Service>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let purge_every = Duration::from_secs(service.config().ttl_s.max(1));
    let purger = {
        let svc = Arc::clone(&service);
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(purge_every);
            tick.tick().await;
            loop {
                tick.tick().await;
                let n = svc.purge_expired_tokens();
                tracing::debug!(purged = n, "expired tokens purged");
            }
        })
    };
    let result = axum::serve(listener, router(Arc::clone(&service)))
        .with_graceful_shutdown(shutdown)
        .await;
    purger.abort();
    service.write_snapshot()?;
    result
}

/// A server running on its own thread and runtime, for tests, benches and
/// the device simulator. Stops when dropped.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    /// Binds `bind:port` (port 0 picks a free one) and starts serving.
    pub fn start(service: Arc<Service>, bind: &str, port: u16, workers: usize) -> std::io::Result<Self> {
        let listener = std::net::TcpListener::bind((bind, port))?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::Builder::new()
            .name("mediflow-server".into())
            .spawn(move || {
                let rt = tokio::runtime::Builder::new_multi_thread()
                    .worker_threads(workers.max(1))
                    .enable_all()
                    .build()?;
                rt.block_on(async move {
                    let listener = TcpListener::from_std(listener)?;
                    serve(listener, service, async {
                        let _ = rx.await;
                    })
                    .await
                })
            })?;
        Ok(Self {
            addr,
            stop: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}
