use std::collections::HashMap;

use super::SearchError;
use crate::embedder::EmbeddingVector;

const LANES_F64: usize = 16;
const LANES_F32: usize = 32;

/// Dot product accumulated in `f64`. Each of the 16 lanes sums its own
/// stride of the input, in a fixed order.
pub fn dot_f64(a: &[f32], b: &[f32]) -> f64 {
    dot_f64_portable(a, b)
}

/// Single-precision dot product.
pub fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    dot_f32_portable(a, b)
}

/// Exact integer dot product of two 8-bit code rows.
pub fn dot_i8(a: &[i8], b: &[i8]) -> i32 {
    let mut acc = [0i32; 32];
    let ca = a.chunks_exact(32);
    let cb = b.chunks_exact(32);
    let tail: i32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| i32::from(*x) * i32::from(*y)).sum();
    for (x, y) in ca.zip(cb) {
        let x: &[i8; 32] = x.try_into().unwrap();
        let y: &[i8; 32] = y.try_into().unwrap();
        for l in 0..32 {
            acc[l] += i32::from(x[l]) * i32::from(y[l]);
        }
    }
    acc.iter().sum::<i32>() + tail
}

/// Symmetric 8-bit quantization of one row: `x ≈ scale * code`.
pub fn quantize(row: &[f32]) -> (Vec<i8>, f32) {
    let max = row.iter().fold(0.0f32, |m, x| m.max(x.abs()));
    if max == 0.0 || !max.is_finite() {
        return (vec![0; row.len()], 0.0);
    }
    let scale = max / 127.0;
    (row.iter().map(|x| (x / scale).round().clamp(-127.0, 127.0) as i8).collect(), scale)
}

fn dot_f64_portable(a: &[f32], b: &[f32]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; LANES_F64];
    let ca = a.chunks_exact(LANES_F64);
    let cb = b.chunks_exact(LANES_F64);
    let mut tail = 0.0f64;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += f64::from(*x) * f64::from(*y);
    }
    for (x, y) in ca.zip(cb) {
        let x: &[f32; LANES_F64] = x.try_into().unwrap();
        let y: &[f32; LANES_F64] = y.try_into().unwrap();
        for l in 0..LANES_F64 {
            acc[l] += f64::from(x[l]) * f64::from(y[l]);
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn dot_f32_portable(a: &[f32], b: &[f32]) -> f32 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f32; LANES_F32];
    let ca = a.chunks_exact(LANES_F32);
    let cb = b.chunks_exact(LANES_F32);
    let mut tail = 0.0f32;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    for (x, y) in ca.zip(cb) {
        let x: &[f32; LANES_F32] = x.try_into().unwrap();
        let y: &[f32; LANES_F32] = y.try_into().unwrap();
        for l in 0..LANES_F32 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f32>() + tail
}

/// Row-major `f32` matrix of unit vectors keyed by fragment id.
#[derive(Debug, Clone, Default)]
pub struct VectorStore {
    dimension: usize,
    ids: Vec<u64>,
    data: Vec<f32>,
    norms: Vec<f64>,
    positions: HashMap<u64, usize>,
}

impl VectorStore {
    /// Copies and L2-normalizes the input rows. All rows must share one
    /// dimension and ids must be unique.
    pub fn new(vectors: &[EmbeddingVector]) -> Result<Self, SearchError> {
        let dimension = vectors.first().map_or(0, |v| v.values.len());
        let mut store = VectorStore {
            dimension,
            ids: Vec::with_capacity(vectors.len()),
            data: Vec::with_capacity(vectors.len() * dimension),
            norms: Vec::with_capacity(vectors.len()),
            positions: HashMap::with_capacity(vectors.len()),
        };
        for v in vectors {
            store.push(v.fragment_id, &v.values)?;
        }
        Ok(store)
    }

    pub(crate) fn with_dimension(dimension: usize) -> Self {
        VectorStore { dimension, ..Default::default() }
    }

    pub(crate) fn push(&mut self, id: u64, values: &[f32]) -> Result<(), SearchError> {
        if values.len() != self.dimension {
            return Err(SearchError::DimensionMismatch { expected: self.dimension, got: values.len() });
        }
        let norm = dot_f64(values, values).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(SearchError::ZeroVector);
        }
        if self.positions.insert(id, self.ids.len()).is_some() {
            return Err(SearchError::DuplicateId(id));
        }
        let start = self.data.len();
        self.data.extend(values.iter().map(|x| (f64::from(*x) / norm) as f32));
        self.norms.push(dot_f64(&self.data[start..], &self.data[start..]).sqrt());
        self.ids.push(id);
        Ok(())
    }

    /// Inserts an already normalized row without rescaling it.
    pub(crate) fn push_raw(&mut self, id: u64, values: &[f32]) -> Result<(), SearchError> {
        if values.len() != self.dimension {
            return Err(SearchError::DimensionMismatch { expected: self.dimension, got: values.len() });
        }
        if self.positions.insert(id, self.ids.len()).is_some() {
            return Err(SearchError::DuplicateId(id));
        }
        self.data.extend_from_slice(values);
        self.norms.push(dot_f64(values, values).sqrt());
        self.ids.push(id);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn row(&self, pos: usize) -> &[f32] {
        &self.data[pos * self.dimension..(pos + 1) * self.dimension]
    }

    pub fn position(&self, id: u64) -> Option<usize> {
        self.positions.get(&id).copied()
    }

    /// Cosine between row `pos` and a query with precomputed norm.
    pub(crate) fn cosine_to(&self, pos: usize, query: &[f32], query_norm: f64) -> f64 {
        (dot_f64(self.row(pos), query) / (self.norms[pos] * query_norm)).clamp(-1.0, 1.0)
    }

    pub(crate) fn check_query(&self, query: &[f32]) -> Result<f64, SearchError> {
        if query.len() != self.dimension {
            return Err(SearchError::DimensionMismatch { expected: self.dimension, got: query.len() });
        }
        let norm = dot_f64(query, query).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(SearchError::ZeroVector);
        }
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dots_agree() {
        let a: Vec<f32> = (0..37).map(|i| (i as f32 * 0.37).sin()).collect();
        let b: Vec<f32> = (0..37).map(|i| (i as f32 * 0.11).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
        assert!((dot_f64(&a, &b) - naive).abs() < 1e-12);
        assert!((f64::from(dot_f32(&a, &b)) - naive).abs() < 1e-5);
    }

    #[test]
    fn quantized_dot_tracks_float_dot() {
        let a: Vec<f32> = (0..768).map(|i| (i as f32 * 0.013).sin() / 20.0).collect();
        let b: Vec<f32> = (0..768).map(|i| (i as f32 * 0.017).sin() / 20.0).collect();
        let (qa, sa) = quantize(&a);
        let (qb, sb) = quantize(&b);
        let approx = f64::from(sa * sb) * f64::from(dot_i8(&qa, &qb));
        let exact = dot_f64(&a, &b);
        assert!((approx - exact).abs() < 1e-2 * dot_f64(&a, &a).sqrt() * dot_f64(&b, &b).sqrt(), "{approx} {exact}");
        assert_eq!(quantize(&[0.0, 0.0]).1, 0.0);
    }

    #[test]
    fn store_normalizes_and_rejects_bad_rows() {
        let mut s = VectorStore::new(&[EmbeddingVector { fragment_id: 4, values: vec![3.0, 4.0] }]).unwrap();
        assert_eq!(s.row(0), &[0.6, 0.8]);
        assert_eq!(s.position(4), Some(0));
        assert!(matches!(s.push(4, &[1.0, 0.0]), Err(SearchError::DuplicateId(4))));
        assert!(matches!(s.push(5, &[0.0, 0.0]), Err(SearchError::ZeroVector)));
        assert!(matches!(s.push(6, &[1.0]), Err(SearchError::DimensionMismatch { .. })));
    }
}
