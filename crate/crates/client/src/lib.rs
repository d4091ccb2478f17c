//! Async client for the reward service.

use std::time::Duration;

use cikit_core::api::{
    CaseView, ErrorBody, HealthResponse, RewardItem, RewardMode, RewardRequest, RewardResponse, RewardSummary,
};
use serde::de::DeserializeOwned;
use thiserror::Error;

pub const URL_ENV: &str = "CIKIT_URL";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request to {url} failed: {source}")]
    Transport { url: String, source: reqwest::Error },
    #[error("{url} returned {status}: {body}")]
    Status { url: String, status: u16, body: String },
    #[error("{0} is not set")]
    MissingUrl(&'static str),
}

#[derive(Debug, Clone)]
pub struct RewardClient {
    base_url: String,
    http: reqwest::Client,
}

impl RewardClient {
    pub fn new(base_url: impl Into<String>) -> Result<Self, ClientError> {
        Self::with_timeout(base_url, Duration::from_secs(30))
    }

    pub fn with_timeout(base_url: impl Into<String>, timeout: Duration) -> Result<Self, ClientError> {
        let base_url = base_url.into().trim_end_matches('/').to_string();
        let http = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|source| ClientError::Transport { url: base_url.clone(), source })?;
        Ok(Self { base_url, http })
    }

    /// Reads the base URL from `CIKIT_URL`.
    pub fn from_env() -> Result<Self, ClientError> {
        let url = std::env::var(URL_ENV).map_err(|_| ClientError::MissingUrl(URL_ENV))?;
        Self::new(url)
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Scores a batch. An empty batch returns an empty response without a request.
    pub async fn reward_batch(&self, items: Vec<RewardItem>, mode: RewardMode) -> Result<RewardResponse, ClientError> {
        if items.is_empty() {
            return Ok(RewardResponse {
                items: vec![],
                summary: RewardSummary { mean_reward: None, format_failures: 0 },
            });
        }
        self.reward(&RewardRequest { items, mode }).await
    }

    pub async fn reward(&self, request: &RewardRequest) -> Result<RewardResponse, ClientError> {
        let url = format!("{}/v1/reward", self.base_url);
        let resp = self.http.post(&url).json(request).send().await;
        decode(url, resp).await
    }

    pub async fn health(&self) -> Result<HealthResponse, ClientError> {
        let url = format!("{}/v1/health", self.base_url);
        decode(url.clone(), self.http.get(&url).send().await).await
    }

    pub async fn get_case(&self, id: &str, include_gold: bool) -> Result<CaseView, ClientError> {
        let mut url = format!("{}/v1/cases/{}", self.base_url, encode_segment(id));
        if include_gold {
            url.push_str("?include_gold=true");
        }
        decode(url.clone(), self.http.get(&url).send().await).await
    }
}

async fn decode<T: DeserializeOwned>(
    url: String,
    resp: Result<reqwest::Response, reqwest::Error>,
) -> Result<T, ClientError> {
    let resp = resp.map_err(|source| ClientError::Transport { url: url.clone(), source })?;
    let status = resp.status();
    if !status.is_success() {
        let text = resp.text().await.unwrap_or_default();
        let body = serde_json_error(&text).unwrap_or(text);
        return Err(ClientError::Status { url, status: status.as_u16(), body });
    }
    resp.json::<T>().await.map_err(|source| ClientError::Transport { url, source })
}

fn serde_json_error(text: &str) -> Option<String> {
    serde_json::from_str::<ErrorBody>(text).ok().map(|b| b.error)
}

/// Percent-encodes everything outside the unreserved URL characters.
fn encode_segment(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}
