//! Nearest-neighbour search over fragment embeddings.
//!
//! Two interchangeable back ends implement [`NeighborIndex`]: an exact
//! full scan and an HNSW graph. Both report cosine similarity, exclude the
//! query's own id, apply the similarity floor before the top-k cut and break
//! ties by ascending hit id.

mod exact;
mod hnsw;
mod persist;
mod store;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedder::EmbeddingVector;

pub use exact::ExactIndex;
pub use hnsw::{assign_level, GraphAudit, HnswIndex, HnswParams};
pub use persist::{load_hnsw, save_hnsw, HNSW_MAGIC, HNSW_VERSION};
pub use store::{dot_f32, dot_f64, dot_i8, quantize, VectorStore};

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero or non-finite vector")]
    ZeroVector,
    #[error("unknown query id {0}")]
    UnknownQuery(u64),
    #[error("duplicate fragment id {0}")]
    DuplicateId(u64),
    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: corrupt index at byte offset {offset}: {reason}")]
    Corrupt { path: String, offset: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchType {
    #[default]
    Exact,
    Hnsw,
}

impl FromStr for SearchType {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "knn" => Ok(SearchType::Exact),
            "hnsw" | "kann" => Ok(SearchType::Hnsw),
            _ => Err(SearchError::InvalidParams(format!("unknown search type `{s}`"))),
        }
    }
}

impl fmt::Display for SearchType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchType::Exact => "exact",
            SearchType::Hnsw => "hnsw",
        })
    }
}

/// Query-time parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub search_type: SearchType,
    /// Maximum candidates per query.
    pub k: usize,
    /// HNSW beam width; ignored by exact search.
    pub ef_search: usize,
    /// Cosine floor; candidates below it are dropped.
    pub similarity_floor: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams { search_type: SearchType::Exact, k: 10, ef_search: 120, similarity_floor: 0.95 }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.k == 0 {
            return Err(SearchError::InvalidParams("k must be at least 1".into()));
        }
        if self.search_type == SearchType::Hnsw && self.ef_search < self.k {
            return Err(SearchError::InvalidParams(format!(
                "ef_search ({}) must be at least k ({})",
                self.ef_search, self.k
            )));
        }
        if !(-1.0..=1.0).contains(&self.similarity_floor) {
            return Err(SearchError::InvalidParams(format!(
                "similarity floor {} is outside [-1, 1]",
                self.similarity_floor
            )));
        }
        Ok(())
    }
}

/// One ranked hit for a query fragment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloneCandidate {
    pub query_id: u64,
    pub hit_id: u64,
    pub similarity: f64,
    /// 1-based position in the query's list.
    pub rank: u32,
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64, SearchError> {
    if a.len() != b.len() {
        return Err(SearchError::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let na = dot_f64(a, a).sqrt();
    let nb = dot_f64(b, b).sqrt();
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(SearchError::ZeroVector);
    }
    Ok((dot_f64(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Descending similarity, then ascending id.
pub(crate) fn hit_order(a: &(u64, f64), b: &(u64, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Applies self-exclusion, the similarity floor, ordering and the top-k cut.
pub(crate) fn rank_hits(query_id: Option<u64>, mut hits: Vec<(u64, f64)>, k: usize, floor: f64) -> Vec<CloneCandidate> {
    hits.retain(|(id, sim)| Some(*id) != query_id && *sim >= floor);
    if hits.len() > k {
        hits.select_nth_unstable_by(k - 1, hit_order);
        hits.truncate(k);
    }
    hits.sort_unstable_by(hit_order);
    hits.into_iter()
        .enumerate()
        .map(|(i, (hit_id, similarity))| CloneCandidate {
            query_id: query_id.unwrap_or(u64::MAX),
            hit_id,
            similarity,
            rank: i as u32 + 1,
        })
        .collect()
}

/// Common contract of the exact and approximate back ends.
pub trait NeighborIndex: Send + Sync {
    fn store(&self) -> &VectorStore;

    /// Ranked neighbours of an arbitrary query vector. `exclude` removes one
    /// id (normally the query's own) from the results.
    fn search_vector(
        &self,
        query: &[f32],
        exclude: Option<u64>,
        params: &SearchParams,
    ) -> Result<Vec<CloneCandidate>, SearchError>;

    /// Ranked neighbours of an indexed fragment, excluding itself.
    fn search_id(&self, query_id: u64, params: &SearchParams) -> Result<Vec<CloneCandidate>, SearchError> {
        let row = self.store().position(query_id).ok_or(SearchError::UnknownQuery(query_id))?;
        let query = self.store().row(row).to_vec();
        self.search_vector(&query, Some(query_id), params)
    }

    fn len(&self) -> usize {
        self.store().len()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One ranked list per indexed fragment, in index order. Queries run in
/// parallel on the current rayon pool.
pub fn search_all(index: &dyn NeighborIndex, params: &SearchParams) -> Result<Vec<Vec<CloneCandidate>>, SearchError> {
    params.validate()?;
    index.store().ids().par_iter().map(|id| index.search_id(*id, params)).collect()
}

/// Builds the back end selected by `params.search_type`.
pub fn build_index(
    vectors: &[EmbeddingVector],
    params: &SearchParams,
    hnsw: &HnswParams,
) -> Result<Box<dyn NeighborIndex>, SearchError> {
    Ok(match params.search_type {
        SearchType::Exact => Box::new(ExactIndex::new(vectors)?),
        SearchType::Hnsw => Box::new(HnswIndex::build(vectors, hnsw)?),
    })
}
