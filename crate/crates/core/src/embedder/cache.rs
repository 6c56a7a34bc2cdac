//! Binary embedding cache.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "SSCDEMB1"
//! count      u32
//! dimension  u32
//! count x { fragment_id u64, dimension x f32 }
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::EmbeddingVector;

pub const EMBEDDING_MAGIC: &[u8; 8] = b"SSCDEMB1";
const HEADER_LEN: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: corrupt embedding cache at byte offset {offset}: {reason}")]
    Corrupt { path: PathBuf, offset: usize, reason: String },
    #[error("vector for fragment {fragment_id} has dimension {got}, expected {expected}")]
    MixedDimensions { fragment_id: u64, expected: usize, got: usize },
    #[error("too many vectors for the cache format: {0}")]
    TooLarge(usize),
}

pub fn save_embeddings(path: &Path, vectors: &[EmbeddingVector]) -> Result<(), CacheError> {
    let dimension = vectors.first().map_or(0, |v| v.values.len());
    for v in vectors {
        if v.values.len() != dimension {
            return Err(CacheError::MixedDimensions {
                fragment_id: v.fragment_id,
                expected: dimension,
                got: v.values.len(),
            });
        }
    }
    let count = u32::try_from(vectors.len()).map_err(|_| CacheError::TooLarge(vectors.len()))?;
    let dim32 = u32::try_from(dimension).map_err(|_| CacheError::TooLarge(dimension))?;
    let io = |source| CacheError::Io { path: path.to_path_buf(), source };

    let mut out = BufWriter::new(fs::File::create(path).map_err(io)?);
    out.write_all(EMBEDDING_MAGIC).map_err(io)?;
    out.write_all(&count.to_le_bytes()).map_err(io)?;
    out.write_all(&dim32.to_le_bytes()).map_err(io)?;
    for v in vectors {
        out.write_all(&v.fragment_id.to_le_bytes()).map_err(io)?;
        for x in &v.values {
            out.write_all(&x.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

pub fn load_embeddings(path: &Path) -> Result<Vec<EmbeddingVector>, CacheError> {
    let bytes = fs::read(path).map_err(|source| CacheError::Io { path: path.to_path_buf(), source })?;
    decode(&bytes).map_err(|(offset, reason)| CacheError::Corrupt { path: path.to_path_buf(), offset, reason })
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn decode(bytes: &[u8]) -> Result<Vec<EmbeddingVector>, (usize, String)> {
    if bytes.len() < HEADER_LEN {
        return Err((bytes.len(), format!("header needs {HEADER_LEN} bytes")));
    }
    if &bytes[..8] != EMBEDDING_MAGIC {
        return Err((0, "bad magic".into()));
    }
    let count = u32_at(bytes, 8) as usize;
    let dimension = u32_at(bytes, 12) as usize;
    if count > 0 && dimension == 0 {
        return Err((12, "zero dimension with non-empty vector set".into()));
    }
    let record = 8 + 4 * dimension;
    let expected = HEADER_LEN + count * record;
    if bytes.len() < expected {
        let complete = (bytes.len() - HEADER_LEN) / record;
        return Err((HEADER_LEN + complete * record, format!("truncated: record {complete} of {count} is incomplete")));
    }
    if bytes.len() > expected {
        return Err((expected, format!("{} trailing bytes", bytes.len() - expected)));
    }

    let mut out = Vec::with_capacity(count);
    let mut at = HEADER_LEN;
    for _ in 0..count {
        let fragment_id = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        at += 8;
        let mut values = Vec::with_capacity(dimension);
        for _ in 0..dimension {
            let x = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
            if !x.is_finite() {
                return Err((at, "non-finite component".into()));
            }
            values.push(x);
            at += 4;
        }
        out.push(EmbeddingVector { fragment_id, values });
    }
    Ok(out)
}
