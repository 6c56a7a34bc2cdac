//! Fragment embeddings.
//!
//! Every provider maps a batch of fragments to raw vectors; [`embed_batch`]
//! truncates, batches, validates and L2-normalizes, so all downstream code
//! sees unit vectors of one dimension.

mod cache;
mod hash;
mod remote;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::extractor::CodeFragment;

pub use cache::{load_embeddings, save_embeddings, CacheError, EMBEDDING_MAGIC};
pub use hash::{bucket_counts, hash_embed, token_hash, token_slot, DEFAULT_SEED};
pub use remote::{EmbedRequest, EmbedResponse, RemoteEmbedder, RetryPolicy};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("cannot embed an empty token sequence")]
    EmptyTokens,
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("cannot pool an empty set of vectors")]
    EmptyPool,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid embedder configuration: {0}")]
    InvalidConfig(String),
    #[error("remote embedding service: {0}")]
    Remote(String),
    #[error("batch {batch} (fragments {first_id}..={last_id}) failed: {source}")]
    Batch {
        batch: usize,
        first_id: u64,
        last_id: u64,
        #[source]
        source: Box<EmbedError>,
    },
}

/// A unit-norm embedding of one fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub fragment_id: u64,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Hash,
    Remote,
}

impl FromStr for ProviderKind {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hash" => Ok(ProviderKind::Hash),
            "remote" => Ok(ProviderKind::Remote),
            _ => Err(EmbedError::InvalidConfig(format!("unknown provider `{s}`"))),
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Hash => "hash",
            ProviderKind::Remote => "remote",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub provider: ProviderKind,
    pub dimension: usize,
    /// Maximum number of tokens consumed per fragment.
    pub code_length: usize,
    /// Model label, forwarded to remote services and used in reports.
    pub model_name: String,
    pub service_endpoint: Option<String>,
    pub batch_size: usize,
    pub seed: u64,
    pub request_timeout: Duration,
    pub retry: RetryPolicyConfig,
}

/// Serializable mirror of [`RetryPolicy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicyConfig {
    pub attempts: u32,
    pub initial_backoff_ms: u64,
}

impl Default for RetryPolicyConfig {
    fn default() -> Self {
        let p = RetryPolicy::default();
        RetryPolicyConfig { attempts: p.attempts, initial_backoff_ms: p.initial_backoff.as_millis() as u64 }
    }
}

impl From<RetryPolicyConfig> for RetryPolicy {
    fn from(c: RetryPolicyConfig) -> Self {
        RetryPolicy { attempts: c.attempts, initial_backoff: Duration::from_millis(c.initial_backoff_ms) }
    }
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            provider: ProviderKind::Hash,
            dimension: 768,
            code_length: 128,
            model_name: "hash-v1".to_owned(),
            service_endpoint: None,
            batch_size: 64,
            seed: DEFAULT_SEED,
            request_timeout: Duration::from_secs(60),
            retry: RetryPolicyConfig::default(),
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dimension == 0 {
            return Err(EmbedError::InvalidConfig("dimension must be positive".into()));
        }
        if self.code_length == 0 {
            return Err(EmbedError::InvalidConfig("code length must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(EmbedError::InvalidConfig("batch size must be positive".into()));
        }
        if self.provider == ProviderKind::Remote && self.service_endpoint.is_none() {
            return Err(EmbedError::InvalidConfig("remote provider needs a service endpoint".into()));
        }
        Ok(())
    }

    /// Instantiates the configured provider.
    pub fn provider(&self) -> Result<Box<dyn EmbeddingProvider>, EmbedError> {
        self.validate()?;
        Ok(match self.provider {
            ProviderKind::Hash => {
                Box::new(HashEmbedder { dimension: self.dimension, code_length: self.code_length, seed: self.seed })
            }
            ProviderKind::Remote => Box::new(RemoteEmbedder::new(
                self.service_endpoint.as_deref().unwrap_or_default(),
                self.model_name.clone(),
                self.code_length,
                self.dimension,
                self.request_timeout,
                self.retry.into(),
            )),
        })
    }
}

/// Source of raw (not necessarily normalized) fragment vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    /// One raw vector per fragment, in batch order.
    fn embed(&self, batch: &[&CodeFragment]) -> Result<Vec<Vec<f64>>, EmbedError>;

    /// Whether batches may be sent concurrently.
    fn parallel(&self) -> bool {
        true
    }
}

/// Feature-hash provider over the fragment's (truncated) token sequence.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    pub dimension: usize,
    pub code_length: usize,
    pub seed: u64,
}

impl EmbeddingProvider for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, batch: &[&CodeFragment]) -> Result<Vec<Vec<f64>>, EmbedError> {
        batch
            .iter()
            .map(|f| {
                let tokens = truncate_tokens(&f.tokens, self.code_length);
                if tokens.is_empty() {
                    return Err(EmbedError::EmptyTokens);
                }
                Ok(bucket_counts(tokens, self.dimension, self.seed))
            })
            .collect()
    }
}

/// The first `min(len, max_tokens)` tokens.
pub fn truncate_tokens<T>(tokens: &[T], max_tokens: usize) -> &[T] {
    &tokens[..tokens.len().min(max_tokens)]
}

/// L2-normalizes in `f64` and narrows to `f32`. `None` for zero or
/// non-finite input.
pub fn l2_normalize(values: &[f64]) -> Option<Vec<f32>> {
    if values.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    Some(values.iter().map(|x| (x / norm) as f32).collect())
}

/// Component-wise mean of token vectors, L2-normalized.
pub fn mean_pool(token_vectors: &[Vec<f32>]) -> Result<Vec<f32>, EmbedError> {
    let first = token_vectors.first().ok_or(EmbedError::EmptyPool)?;
    let dim = first.len();
    let mut acc = vec![0.0f64; dim];
    for v in token_vectors {
        if v.len() != dim {
            return Err(EmbedError::DimensionMismatch { expected: dim, got: v.len() });
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += f64::from(*x);
        }
    }
    let n = token_vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    l2_normalize(&acc).ok_or(EmbedError::ZeroNorm)
}

/// Embeds fragments with the provider configured in `cfg`.
pub fn embed_batch(fragments: &[CodeFragment], cfg: &EmbedderConfig) -> Result<Vec<EmbeddingVector>, EmbedError> {
    let provider = cfg.provider()?;
    embed_with(provider.as_ref(), fragments, cfg.batch_size)
}

/// Embeds fragments with an explicit provider.
///
/// Fragments without tokens are dropped with a warning, as are fragments
/// whose raw vector has zero norm. The output keeps fragment order and does
/// not depend on how batches are scheduled.
pub fn embed_with(
    provider: &dyn EmbeddingProvider,
    fragments: &[CodeFragment],
    batch_size: usize,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    if batch_size == 0 {
        return Err(EmbedError::InvalidConfig("batch size must be positive".into()));
    }
    let usable: Vec<&CodeFragment> = fragments
        .iter()
        .filter(|f| {
            if f.tokens.is_empty() {
                warn!("fragment {} ({}:{}) has no tokens; skipped", f.id, f.file, f.start_line);
            }
            !f.tokens.is_empty()
        })
        .collect();
    let dimension = provider.dimension();
    let run = |(batch, chunk): (usize, &[&CodeFragment])| -> Result<Vec<Option<EmbeddingVector>>, EmbedError> {
        let wrap = |e: EmbedError| EmbedError::Batch {
            batch,
            first_id: chunk[0].id,
            last_id: chunk[chunk.len() - 1].id,
            source: Box::new(e),
        };
        let raw = provider.embed(chunk).map_err(wrap)?;
        if raw.len() != chunk.len() {
            return Err(wrap(EmbedError::Remote(format!("{} vectors for {} fragments", raw.len(), chunk.len()))));
        }
        raw.into_iter()
            .zip(chunk)
            .map(|(values, f)| {
                if values.len() != dimension {
                    return Err(wrap(EmbedError::DimensionMismatch { expected: dimension, got: values.len() }));
                }
                Ok(match l2_normalize(&values) {
                    Some(values) => Some(EmbeddingVector { fragment_id: f.id, values }),
                    None => {
                        warn!("fragment {} has a degenerate embedding; skipped", f.id);
                        None
                    }
                })
            })
            .collect()
    };
    let batches: Vec<(usize, &[&CodeFragment])> = usable.chunks(batch_size).enumerate().collect();
    let results: Vec<Vec<Option<EmbeddingVector>>> = if provider.parallel() {
        batches.into_par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        batches.into_iter().map(run).collect::<Result<_, _>>()?
    };
    Ok(results.into_iter().flatten().flatten().collect())
}
