//! Client for an HTTP embedding service.
//!
//! `POST {endpoint}/embed` with `{"model", "max_tokens", "texts"}`; the
//! service answers `{"dimension", "vectors"}` with one row per text, in order.

use std::thread;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingProvider};
use crate::extractor::CodeFragment;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmbedRequest {
    pub model: String,
    pub max_tokens: usize,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmbedResponse {
    pub dimension: usize,
    pub vectors: Vec<Vec<f64>>,
}

/// Attempts per batch and the delay before the first retry; each further
/// retry doubles the delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, initial_backoff: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, retry: u32) -> Duration {
        self.initial_backoff * 2u32.saturating_pow(retry)
    }
}

pub struct RemoteEmbedder {
    url: String,
    model: String,
    max_tokens: usize,
    dimension: usize,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint: &str,
        model: impl Into<String>,
        max_tokens: usize,
        dimension: usize,
        timeout: Duration,
        retry: RetryPolicy,
    ) -> Self {
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with("/embed") { base.to_owned() } else { format!("{base}/embed") };
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        RemoteEmbedder { url, model: model.into(), max_tokens, dimension, retry, agent }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn post_once(&self, req: &EmbedRequest) -> Result<EmbedResponse, Attempt> {
        let mut resp = self.agent.post(&self.url).send_json(req).map_err(|e| match e {
            ureq::Error::StatusCode(code) if code == 429 || code >= 500 => Attempt::Retry(format!("HTTP {code}")),
            ureq::Error::StatusCode(code) => Attempt::Fatal(format!("HTTP {code}")),
            other => Attempt::Retry(other.to_string()),
        })?;
        resp.body_mut().read_json::<EmbedResponse>().map_err(|e| Attempt::Fatal(format!("malformed response: {e}")))
    }

    /// Sends one request with the retry policy applied.
    pub fn request(&self, req: &EmbedRequest) -> Result<EmbedResponse, EmbedError> {
        let attempts = self.retry.attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.retry.backoff(attempt - 1));
            }
            match self.post_once(req) {
                Ok(resp) => return Ok(resp),
                Err(Attempt::Fatal(msg)) => return Err(EmbedError::Remote(msg)),
                Err(Attempt::Retry(msg)) => {
                    warn!("{}: attempt {} of {attempts} failed: {msg}", self.url, attempt + 1);
                    last = msg;
                }
            }
        }
        Err(EmbedError::Remote(format!("{} unreachable after {attempts} attempts: {last}", self.url)))
    }
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl EmbeddingProvider for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, batch: &[&CodeFragment]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let req = EmbedRequest {
            model: self.model.clone(),
            max_tokens: self.max_tokens,
            texts: batch.iter().map(|f| f.text.clone()).collect(),
        };
        let resp = self.request(&req)?;
        if resp.vectors.len() != batch.len() {
            return Err(EmbedError::Remote(format!(
                "service returned {} vectors for {} texts",
                resp.vectors.len(),
                batch.len()
            )));
        }
        for row in &resp.vectors {
            if resp.dimension != self.dimension || row.len() != self.dimension {
                return Err(EmbedError::DimensionMismatch {
                    expected: self.dimension,
                    got: if row.len() != self.dimension { row.len() } else { resp.dimension },
                });
            }
        }
        Ok(resp.vectors)
    }
}
