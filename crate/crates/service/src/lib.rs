//! HTTP/JSON surface over the match harness.
//!
//! Four operations, all stateless: run a match from a config, compute
//! metrics over a trace, render a trace frame, validate a trace by replay.
//! Traces travel as newline-delimited JSON bodies.

use axum::body::Body;
use axum::extract::{DefaultBodyLimit, Query};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use assembler_core::config::SimConfig;
use assembler_core::harness::{
    compute_metrics, format_table, render, validate, RenderView, ReplayTrace, ValidationReport,
};

pub const NDJSON: &str = "application/x-ndjson";

/// Traces for long desk-scale matches run to tens of megabytes.
const BODY_LIMIT: usize = 512 * 1024 * 1024;

#[derive(Debug, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

pub fn app() -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/run", post(run_match))
        .route("/api/metrics", post(metrics))
        .route("/api/render", post(render_frame))
        .route("/api/validate", post(validate_trace))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
}

/// Serve until the listener dies; binding is the caller's business so tests
/// and the CLI can use ephemeral ports.
pub async fn serve(listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, app()).await
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

fn bad_request(message: impl Into<String>) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(ApiError {
            error: message.into(),
        }),
    )
        .into_response()
}

async fn run_match(Json(config): Json<SimConfig>) -> Response {
    if let Err(e) = config.validate() {
        return bad_request(e.to_string());
    }
    // Matches are CPU-bound; keep them off the async workers.
    let result = tokio::task::spawn_blocking(move || {
        assembler_core::harness::run(&config).and_then(|trace| {
            trace
                .to_ndjson()
                .map_err(|e| assembler_core::config::ConfigError::Invalid(e.to_string()).into())
        })
    })
    .await;
    match result {
        Ok(Ok(ndjson)) => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, NDJSON)],
            Body::from(ndjson),
        )
            .into_response(),
        Ok(Err(e)) => bad_request(e.to_string()),
        Err(e) => bad_request(format!("match execution panicked: {e}")),
    }
}

#[derive(Debug, Deserialize)]
struct MetricsQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn metrics(Query(query): Query<MetricsQuery>, body: String) -> Response {
    let trace = match ReplayTrace::from_ndjson(&body) {
        Ok(t) => t,
        Err(e) => return bad_request(e.to_string()),
    };
    let report = match compute_metrics(&trace) {
        Ok(r) => r,
        Err(e) => return bad_request(e.to_string()),
    };
    match query.format.as_deref() {
        None | Some("json") => Json(report).into_response(),
        Some("table") => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
            format_table(&report),
        )
            .into_response(),
        Some(other) => bad_request(format!("unknown format {other:?}")),
    }
}

#[derive(Debug, Deserialize)]
struct RenderQuery {
    step: u64,
    #[serde(default)]
    agent: Option<String>,
}

async fn render_frame(Query(query): Query<RenderQuery>, body: String) -> Response {
    let trace = match ReplayTrace::from_ndjson(&body) {
        Ok(t) => t,
        Err(e) => return bad_request(e.to_string()),
    };
    let view = match query.agent {
        Some(name) => RenderView::Agent(name),
        None => RenderView::Global,
    };
    match render(&trace, query.step, &view) {
        Ok(frame) => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
            frame,
        )
            .into_response(),
        Err(e) => bad_request(e.to_string()),
    }
}

async fn validate_trace(body: String) -> Response {
    let trace = match ReplayTrace::from_ndjson(&body) {
        Ok(t) => t,
        Err(e) => return bad_request(e.to_string()),
    };
    let report: ValidationReport = match tokio::task::spawn_blocking(move || validate(&trace)).await
    {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => return bad_request(e.to_string()),
        Err(e) => return bad_request(format!("validation panicked: {e}")),
    };
    Json(report).into_response()
}
