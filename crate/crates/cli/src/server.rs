//! HTTP surface of the moderation gateway.
//!
//! `POST /v1/guard/prompt` screens a prompt with both filters,
//! `POST /v1/guard/response` screens a model response with the content
//! filter only, and `GET /healthz` reports backend reachability. Errors are
//! machine-readable `{"error": {"code", "message"}}` bodies. An optional
//! static bearer token protects the `/v1` routes.

use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use guardgate_core::backend::BackendKind;
use guardgate_core::gateway::api::{DecisionBody, ErrorBody};
use guardgate_core::gateway::{GateConfig, GatewayError, Guard, GuardService};

/// Top-level config file: the gate config plus server-only options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServerConfig {
    #[serde(flatten)]
    pub gate: GateConfig,
    /// When set, `/v1` requests must carry `Authorization: Bearer <token>`.
    #[serde(default)]
    pub bearer_token: Option<String>,
}

pub fn load_config(path: &Path) -> anyhow::Result<ServerConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))?;
    let mut config: ServerConfig = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))?;
    apply_env_overrides(&mut config, |name| std::env::var(name).ok());
    config.gate.validate()?;
    Ok(config)
}

/// Environment overrides, applied on top of the config file:
/// `GUARDGATE_CONTENT_ENDPOINT`, `GUARDGATE_JAILBREAK_ENDPOINT`,
/// `GUARDGATE_JAILBREAK_THRESHOLD`, `GUARDGATE_CONTENT_THRESHOLD_<1..5>`,
/// and `GUARDGATE_BEARER_TOKEN`.
pub fn apply_env_overrides(config: &mut ServerConfig, var: impl Fn(&str) -> Option<String>) {
    if let Some(endpoint) = var("GUARDGATE_CONTENT_ENDPOINT") {
        config.gate.content_backend.endpoint = Some(endpoint);
    }
    if let Some(endpoint) = var("GUARDGATE_JAILBREAK_ENDPOINT") {
        config.gate.jailbreak_backend.endpoint = Some(endpoint);
    }
    if let Some(t) = var("GUARDGATE_JAILBREAK_THRESHOLD").and_then(|v| v.parse().ok()) {
        config.gate.jailbreak_threshold = t;
    }
    for k in 1..=5usize {
        if let Some(t) = var(&format!("GUARDGATE_CONTENT_THRESHOLD_{k}")).and_then(|v| v.parse().ok())
        {
            config.gate.content_thresholds.0[k - 1] = t;
        }
    }
    if let Some(token) = var("GUARDGATE_BEARER_TOKEN") {
        config.bearer_token = Some(token);
    }
}

#[derive(Clone)]
struct AppState {
    service: Arc<GuardService>,
    bearer_token: Option<String>,
}

#[derive(Debug, Deserialize)]
struct PromptBody {
    text: String,
}

#[derive(Debug, Deserialize)]
struct ResponseBody {
    prompt: String,
    response: String,
}

fn error_response(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (status, Json(ErrorBody::new(code, message))).into_response()
}

fn gateway_error_response(e: GatewayError) -> Response {
    match e {
        GatewayError::EmptyText(field) => {
            error_response(StatusCode::BAD_REQUEST, "empty_text", format!("{field} must be non-empty"))
        }
        GatewayError::NoVerdictAvailable => error_response(
            StatusCode::BAD_GATEWAY,
            "no_verdict_available",
            "all filters failed under fail-open policy",
        ),
        other => error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
    }
}

fn check_bearer(state: &AppState, headers: &HeaderMap) -> Result<(), Box<Response>> {
    let Some(expected) = &state.bearer_token else { return Ok(()) };
    let supplied = headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if supplied == Some(expected.as_str()) {
        Ok(())
    } else {
        Err(Box::new(error_response(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            "missing or wrong bearer token",
        )))
    }
}

async fn screen<F>(state: AppState, run: F) -> Response
where
    F: FnOnce(Arc<GuardService>) -> Result<guardgate_core::gateway::GateDecision, GatewayError>
        + Send
        + 'static,
{
    let service = state.service.clone();
    match tokio::task::spawn_blocking(move || run(service)).await {
        Err(join_err) => {
            error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", join_err.to_string())
        }
        Ok(Err(e)) => gateway_error_response(e),
        Ok(Ok(decision)) => Json(DecisionBody::from_decision(&decision)).into_response(),
    }
}

async fn guard_prompt(
    State(state): State<AppState>,
    headers: HeaderMap,
    payload: Result<Json<PromptBody>, JsonRejection>,
) -> Response {
    if let Err(resp) = check_bearer(&state, &headers) {
        return *resp;
    }
    let Json(body) = match payload {
        Ok(p) => p,
        Err(rejection) => {
            return error_response(StatusCode::BAD_REQUEST, "bad_request", rejection.body_text())
        }
    };
    screen(state, move |service| service.screen_prompt(&body.text)).await
}

async fn guard_response(
    State(state): State<AppState>,
    headers: HeaderMap,
    payload: Result<Json<ResponseBody>, JsonRejection>,
) -> Response {
    if let Err(resp) = check_bearer(&state, &headers) {
        return *resp;
    }
    let Json(body) = match payload {
        Ok(p) => p,
        Err(rejection) => {
            return error_response(StatusCode::BAD_REQUEST, "bad_request", rejection.body_text())
        }
    };
    screen(state, move |service| service.screen_response(&body.prompt, &body.response)).await
}

#[derive(Debug, Serialize)]
struct HealthBody {
    status: &'static str,
    backends: std::collections::BTreeMap<&'static str, &'static str>,
}

/// TCP-level reachability probe for a remote endpoint URL.
fn endpoint_reachable(endpoint: &str) -> bool {
    let Some(rest) = endpoint.strip_prefix("http://").or_else(|| endpoint.strip_prefix("https://"))
    else {
        return false;
    };
    let default_port = if endpoint.starts_with("https://") { 443 } else { 80 };
    let authority = rest.split('/').next().unwrap_or(rest);
    let (host, port) = match authority.rsplit_once(':') {
        Some((h, p)) => (h, p.parse().unwrap_or(default_port)),
        None => (authority, default_port),
    };
    let Ok(mut addrs) = (host, port).to_socket_addrs() else { return false };
    addrs.any(|addr| TcpStream::connect_timeout(&addr, Duration::from_millis(500)).is_ok())
}

fn backend_status(kind: BackendKind, endpoint: Option<&str>) -> &'static str {
    match kind {
        BackendKind::Rule => "ok",
        BackendKind::Remote => match endpoint {
            Some(e) if endpoint_reachable(e) => "ok",
            _ => "unreachable",
        },
    }
}

async fn healthz(State(state): State<AppState>) -> Response {
    let service = state.service.clone();
    let body = tokio::task::spawn_blocking(move || {
        let cfg = service.config();
        let mut backends = std::collections::BTreeMap::new();
        backends.insert(
            "content",
            backend_status(cfg.content_backend.kind, cfg.content_backend.endpoint.as_deref()),
        );
        backends.insert(
            "jailbreak",
            backend_status(cfg.jailbreak_backend.kind, cfg.jailbreak_backend.endpoint.as_deref()),
        );
        let status =
            if backends.values().all(|s| *s == "ok") { "ok" } else { "degraded" };
        HealthBody { status, backends }
    })
    .await
    .unwrap_or(HealthBody { status: "degraded", backends: Default::default() });
    let code = if body.status == "ok" { StatusCode::OK } else { StatusCode::SERVICE_UNAVAILABLE };
    (code, Json(body)).into_response()
}

/// Assemble the router for a realized guard service.
pub fn build_router(service: Arc<GuardService>, bearer_token: Option<String>) -> Router {
    let state = AppState { service, bearer_token };
    Router::new()
        .route("/v1/guard/prompt", post(guard_prompt))
        .route("/v1/guard/response", post(guard_response))
        .route("/healthz", get(healthz))
        .with_state(state)
}

/// A gateway running on an ephemeral port with its own runtime thread.
/// Dropping it shuts the server down gracefully.
pub struct RunningServer {
    pub base_url: String,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl RunningServer {
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Start a gateway on `127.0.0.1:0` in a background thread; used by tests
/// and by embedders that want an in-process gateway.
pub fn spawn_ephemeral(config: ServerConfig) -> anyhow::Result<RunningServer> {
    let service = Arc::new(GuardService::new(config.gate)?);
    let router = build_router(service, config.bearer_token);
    let (shutdown_tx, shutdown_rx) = tokio::sync::oneshot::channel::<()>();
    let (addr_tx, addr_rx) = std::sync::mpsc::channel::<SocketAddr>();
    let thread = std::thread::spawn(move || {
        let runtime = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .expect("runtime builds");
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("ephemeral bind");
            addr_tx.send(listener.local_addr().expect("local addr")).expect("addr channel");
            axum::serve(listener, router)
                .with_graceful_shutdown(async {
                    let _ = shutdown_rx.await;
                })
                .await
                .expect("serve");
        });
    });
    let addr = addr_rx.recv()?;
    Ok(RunningServer {
        base_url: format!("http://{addr}"),
        shutdown: Some(shutdown_tx),
        thread: Some(thread),
    })
}

/// Bind and serve until ctrl-c; in-flight requests complete before exit.
pub async fn serve(config: ServerConfig, bind: SocketAddr) -> anyhow::Result<()> {
    let service = Arc::new(GuardService::new(config.gate)?);
    let router = build_router(service, config.bearer_token);
    let listener = tokio::net::TcpListener::bind(bind).await?;
    tracing::info!("listening on {bind}");
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutdown signal received");
        })
        .await?;
    Ok(())
}
