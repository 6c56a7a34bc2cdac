//! Signed feature hashing of token bags.

use super::{l2_normalize, EmbedError};

/// Seed of the default hash embedder.
pub const DEFAULT_SEED: u64 = 0x5343_4431;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded 64-bit hash of a token: FNV-1a over the UTF-8 bytes, finished with
/// a splitmix64 avalanche. Identical on every platform.
pub fn token_hash(token: &str, seed: u64) -> u64 {
    let mut h = FNV_OFFSET ^ splitmix64(seed);
    for b in token.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

/// Bucket index in `[0, dimension)` and sign for a token.
pub fn token_slot(token: &str, dimension: usize, seed: u64) -> (usize, f64) {
    let h = token_hash(token, seed);
    let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
    ((h >> 1) as usize % dimension, sign)
}

/// Signed bucket sums of a token bag, before normalization.
///
/// Sums are small integers held in `f64`, so the result does not depend on
/// token order.
pub fn bucket_counts(tokens: &[String], dimension: usize, seed: u64) -> Vec<f64> {
    let mut acc = vec![0.0f64; dimension];
    for token in tokens {
        let (idx, sign) = token_slot(token, dimension, seed);
        acc[idx] += sign;
    }
    acc
}

/// Bag-of-tokens embedding: every occurrence adds its sign to its bucket,
/// then the vector is L2-normalized.
pub fn hash_embed(tokens: &[String], dimension: usize, seed: u64) -> Result<Vec<f32>, EmbedError> {
    if dimension == 0 {
        return Err(EmbedError::InvalidConfig("dimension must be positive".into()));
    }
    if tokens.is_empty() {
        return Err(EmbedError::EmptyTokens);
    }
    l2_normalize(&bucket_counts(tokens, dimension, seed)).ok_or(EmbedError::ZeroNorm)
}
