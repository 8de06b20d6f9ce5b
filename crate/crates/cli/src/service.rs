//! JSON-over-HTTP completion service.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use kbc_core::error::EvalError;
use kbc_core::eval_harness::Method;
use kbc_core::mkg_builder::QueryConfig;
use serde::Serialize;
use tokio::net::TcpListener;

use crate::app::{Artifacts, CompletionRequest};

pub struct ServiceState {
    pub artifacts: Artifacts,
    pub query: QueryConfig,
    pub default_method: Method,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: ErrorDetail,
}

#[derive(Debug, Serialize)]
struct ErrorDetail {
    code: &'static str,
    message: String,
}

fn error(status: StatusCode, code: &'static str, message: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: ErrorDetail { code, message: message.into() } })).into_response()
}

#[allow(clippy::result_large_err)] // axum responses are the error path here
fn parse_request(params: &HashMap<String, String>, default_method: Method) -> Result<CompletionRequest, Response> {
    let required = |name: &str| match params.get(name).map(|v| v.trim()) {
        Some(v) if !v.is_empty() => Ok(v.to_string()),
        _ => Err(error(StatusCode::BAD_REQUEST, "missing_parameter", format!("query parameter `{name}` is required"))),
    };
    let subject = required("subject")?;
    let relation = required("relation")?;
    let method = match params.get("method") {
        None => default_method,
        Some(raw) => raw
            .parse()
            .map_err(|msg: String| error(StatusCode::BAD_REQUEST, "unknown_method", msg))?,
    };
    let t = match params.get("t") {
        None => None,
        Some(raw) => match raw.parse::<f64>() {
            Ok(t) if (0.0..=1.0).contains(&t) => Some(t),
            _ => return Err(error(StatusCode::BAD_REQUEST, "invalid_parameter", format!("t must be a number in [0, 1], got {raw:?}"))),
        },
    };
    let k = match params.get("k") {
        None => None,
        Some(raw) => match raw.parse::<usize>() {
            Ok(k) if k >= 1 => Some(k),
            _ => return Err(error(StatusCode::BAD_REQUEST, "invalid_parameter", format!("k must be a positive integer, got {raw:?}"))),
        },
    };
    Ok(CompletionRequest { subject, relation, method, t, k })
}

async fn complete(State(state): State<Arc<ServiceState>>, Query(params): Query<HashMap<String, String>>) -> Response {
    let request = match parse_request(&params, state.default_method) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let worker = Arc::clone(&state);
    let result = tokio::task::spawn_blocking(move || worker.artifacts.complete(&request, worker.query)).await;
    match result {
        Ok(Ok(body)) => Json(body).into_response(),
        Ok(Err(EvalError::Config(msg))) => error(StatusCode::BAD_REQUEST, "method_unavailable", msg),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
    }
}

async fn health() -> &'static str {
    "ok"
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/v1/complete", get(complete))
        .route("/v1/health", get(health))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(listener: TcpListener, state: Arc<ServiceState>) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
