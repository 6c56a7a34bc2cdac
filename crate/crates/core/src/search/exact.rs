use super::{rank_hits, CloneCandidate, NeighborIndex, SearchError, SearchParams, VectorStore};
use crate::embedder::EmbeddingVector;

/// Full-scan index: every query is compared with every row.
#[derive(Debug, Clone, Default)]
pub struct ExactIndex {
    store: VectorStore,
}

impl ExactIndex {
    pub fn new(vectors: &[EmbeddingVector]) -> Result<Self, SearchError> {
        Ok(ExactIndex { store: VectorStore::new(vectors)? })
    }

    pub fn from_store(store: VectorStore) -> Self {
        ExactIndex { store }
    }
}

impl NeighborIndex for ExactIndex {
    fn store(&self) -> &VectorStore {
        &self.store
    }

    fn search_vector(
        &self,
        query: &[f32],
        exclude: Option<u64>,
        params: &SearchParams,
    ) -> Result<Vec<CloneCandidate>, SearchError> {
        if self.store.is_empty() {
            return Ok(Vec::new());
        }
        let qnorm = self.store.check_query(query)?;
        let hits: Vec<(u64, f64)> = self
            .store
            .ids()
            .iter()
            .enumerate()
            .map(|(pos, id)| (*id, self.store.cosine_to(pos, query, qnorm)))
            .collect();
        Ok(rank_hits(exclude, hits, params.k, params.similarity_floor))
    }
}
