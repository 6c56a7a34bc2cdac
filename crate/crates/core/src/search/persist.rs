//! Binary HNSW index files.
//!
//! Layout, little-endian:
//! magic `SSCDHNSW`, u32 version, u32 M, u32 ef_construction, u64 seed,
//! u32 dimension, u64 node count, u32 max level, u64 entry (`u64::MAX` when
//! empty), count × u64 fragment ids, count × u8 levels, then per node and
//! layer a u32 degree followed by (u32 neighbour, f32 distance) pairs, and
//! finally the count × dimension f32 vector blob.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::hnsw::{encode, HnswIndex, HnswParams, Near, MAX_LEVEL};
use super::{SearchError, VectorStore};

pub const HNSW_MAGIC: &[u8; 8] = b"SSCDHNSW";
pub const HNSW_VERSION: u32 = 1;

fn io_err(path: &Path, source: std::io::Error) -> SearchError {
    SearchError::Io { path: path.display().to_string(), source }
}

/// Writes the index to `path` through a temporary sibling file, so a failed
/// write never leaves a partial index behind.
pub fn save_hnsw(index: &HnswIndex, path: &Path) -> Result<(), SearchError> {
    let tmp = path.with_extension("tmp");
    let result = write_to(index, &tmp).and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(path, e));
    }
    Ok(())
}

fn write_to(index: &HnswIndex, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let n = index.store.len();
    w.write_all(HNSW_MAGIC)?;
    w.write_all(&HNSW_VERSION.to_le_bytes())?;
    w.write_all(&(index.params.m as u32).to_le_bytes())?;
    w.write_all(&(index.params.ef_construction as u32).to_le_bytes())?;
    w.write_all(&index.params.seed.to_le_bytes())?;
    w.write_all(&(index.store.dimension() as u32).to_le_bytes())?;
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&(index.max_level as u32).to_le_bytes())?;
    w.write_all(&index.entry.map_or(u64::MAX, u64::from).to_le_bytes())?;
    for id in index.store.ids() {
        w.write_all(&id.to_le_bytes())?;
    }
    w.write_all(&index.levels)?;
    for layers in &index.links {
        for list in layers {
            w.write_all(&(list.len() as u32).to_le_bytes())?;
            for e in list {
                w.write_all(&e.id.to_le_bytes())?;
                w.write_all(&e.dist.to_le_bytes())?;
            }
        }
    }
    for pos in 0..n {
        for x in index.store.row(pos) {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, offset: usize, reason: impl Into<String>) -> SearchError {
        SearchError::Corrupt { path: self.path.display().to_string(), offset, reason: reason.into() }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], SearchError> {
        if self.buf.len() - self.at < n {
            return Err(self.corrupt(self.at, format!("truncated {what}")));
        }
        let out = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32, SearchError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, SearchError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32, SearchError> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Reads an index written by [`save_hnsw`]. Structural problems are
/// reported with the byte offset where they were found.
pub fn load_hnsw(path: &Path) -> Result<HnswIndex, SearchError> {
    let buf = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut r = Reader { buf: &buf, at: 0, path };
    if r.take(8, "magic")? != HNSW_MAGIC {
        return Err(r.corrupt(0, "bad magic"));
    }
    let version = r.u32("version")?;
    if version != HNSW_VERSION {
        return Err(r.corrupt(8, format!("unsupported version {version}")));
    }
    let params = HnswParams {
        m: r.u32("M")? as usize,
        ef_construction: r.u32("ef_construction")? as usize,
        seed: r.u64("seed")?,
    };
    params.validate().map_err(|e| r.corrupt(12, e.to_string()))?;
    let dimension = r.u32("dimension")? as usize;
    let count_at = r.at;
    let n = r.u64("node count")? as usize;
    if n > u32::MAX as usize || n.saturating_mul(9) > buf.len() {
        return Err(r.corrupt(count_at, format!("implausible node count {n}")));
    }
    let max_level = r.u32("max level")? as usize;
    let entry_at = r.at;
    let entry = match r.u64("entry point")? {
        u64::MAX => None,
        e if (e as usize) < n => Some(e as u32),
        e => return Err(r.corrupt(entry_at, format!("entry point {e} out of range"))),
    };
    let ids: Vec<u64> = (0..n).map(|_| r.u64("fragment ids")).collect::<Result<_, _>>()?;
    let levels_at = r.at;
    let levels = r.take(n, "levels")?.to_vec();
    if let Some(i) = levels.iter().position(|l| *l as usize > MAX_LEVEL) {
        return Err(r.corrupt(levels_at + i, format!("level {} too high", levels[i])));
    }
    let mut links = Vec::with_capacity(n);
    for level in &levels {
        let mut layers = Vec::with_capacity(*level as usize + 1);
        for layer in 0..=*level as usize {
            let deg_at = r.at;
            let deg = r.u32("degree")? as usize;
            if deg > params.cap(layer) {
                return Err(r.corrupt(deg_at, format!("degree {deg} exceeds cap on layer {layer}")));
            }
            let mut list = Vec::with_capacity(deg);
            for _ in 0..deg {
                let id_at = r.at;
                let id = r.u32("neighbour")?;
                if id as usize >= n {
                    return Err(r.corrupt(id_at, format!("neighbour {id} out of range")));
                }
                list.push(Near { id, dist: r.f32("distance")? });
            }
            layers.push(list);
        }
        links.push(layers);
    }
    let mut store = VectorStore::with_dimension(dimension);
    let mut row = vec![0f32; dimension];
    for id in ids {
        let row_at = r.at;
        for x in row.iter_mut() {
            *x = r.f32("vector blob")?;
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(r.corrupt(row_at, "non-finite vector value"));
        }
        store.push_raw(id, &row).map_err(|e| r.corrupt(row_at, e.to_string()))?;
    }
    if r.at != buf.len() {
        return Err(r.corrupt(r.at, format!("{} trailing bytes", buf.len() - r.at)));
    }
    let (codes, scales) = encode(&store);
    Ok(HnswIndex { params, store, levels, links, entry, max_level, codes, scales })
}
