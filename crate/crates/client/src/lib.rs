//! Thin async client for the assembler service endpoints.

use serde::Deserialize;
use thiserror::Error;

use assembler_core::config::SimConfig;
use assembler_core::harness::{MetricsReport, ValidationReport};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("service rejected the request ({status}): {message}")]
    Api { status: u16, message: String },
}

#[derive(Debug, Deserialize)]
struct ApiError {
    error: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: impl Into<String>) -> Self {
        let mut base = base_url.into();
        while base.ends_with('/') {
            base.pop();
        }
        Client {
            base,
            http: reqwest::Client::new(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn check(response: reqwest::Response) -> Result<reqwest::Response, ClientError> {
        if response.status().is_success() {
            return Ok(response);
        }
        let status = response.status().as_u16();
        let message = match response.json::<ApiError>().await {
            Ok(e) => e.error,
            Err(_) => "unreadable error body".to_string(),
        };
        Err(ClientError::Api { status, message })
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        let response = self.http.get(self.url("/api/health")).send().await?;
        Ok(Self::check(response).await?.json().await?)
    }

    /// Execute a match; the returned string is the trace in ndjson form.
    pub async fn run(&self, config: &SimConfig) -> Result<String, ClientError> {
        let response = self
            .http
            .post(self.url("/api/run"))
            .json(config)
            .send()
            .await?;
        Ok(Self::check(response).await?.text().await?)
    }

    pub async fn metrics(&self, trace_ndjson: &str) -> Result<MetricsReport, ClientError> {
        let response = self
            .http
            .post(self.url("/api/metrics?format=json"))
            .body(trace_ndjson.to_string())
            .send()
            .await?;
        Ok(Self::check(response).await?.json().await?)
    }

    pub async fn metrics_table(&self, trace_ndjson: &str) -> Result<String, ClientError> {
        let response = self
            .http
            .post(self.url("/api/metrics?format=table"))
            .body(trace_ndjson.to_string())
            .send()
            .await?;
        Ok(Self::check(response).await?.text().await?)
    }

    pub async fn render(
        &self,
        trace_ndjson: &str,
        step: u64,
        agent: Option<&str>,
    ) -> Result<String, ClientError> {
        let mut url = format!("{}?step={step}", self.url("/api/render"));
        if let Some(agent) = agent {
            url.push_str(&format!("&agent={agent}"));
        }
        let response = self
            .http
            .post(url)
            .body(trace_ndjson.to_string())
            .send()
            .await?;
        Ok(Self::check(response).await?.text().await?)
    }

    pub async fn validate(&self, trace_ndjson: &str) -> Result<ValidationReport, ClientError> {
        let response = self
            .http
            .post(self.url("/api/validate"))
            .body(trace_ndjson.to_string())
            .send()
            .await?;
        Ok(Self::check(response).await?.json().await?)
    }
}
