//! JSON-lines fragment manifests and the extracted-fragment cache.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{finalize, tokenize, CodeFragment, ExtractError, ExtractionConfig, TokenizerMode};

/// One line of a fragment manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub file: String,
    pub start_line: usize,
    pub end_line: usize,
    #[serde(default)]
    pub name: Option<String>,
    pub text: String,
}

/// A manifest record plus the fields assigned during extraction.
#[derive(Debug, Serialize, Deserialize)]
struct DumpRecord {
    id: u64,
    file: String,
    start_line: usize,
    end_line: usize,
    name: Option<String>,
    text: String,
    loc: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> ExtractError {
    ExtractError::Io { path: path.to_path_buf(), source }
}

fn manifest_err(path: &Path, line: usize, message: impl Into<String>) -> ExtractError {
    ExtractError::Manifest { path: path.to_path_buf(), line, message: message.into() }
}

/// Non-empty lines of a JSON-lines file, each parsed as `T`, with 1-based
/// line numbers.
fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>, ExtractError> {
    let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| manifest_err(path, lineno, e.to_string()))?;
        out.push((lineno, record));
    }
    Ok(out)
}

/// Loads pre-extracted fragments. Ids follow record order after the LOC
/// filter; `(file, start_line)` must be unique.
pub fn load_manifest(path: &Path, cfg: &ExtractionConfig) -> Result<Vec<CodeFragment>, ExtractError> {
    let records: Vec<(usize, ManifestRecord)> = read_records(path)?;
    let mut seen = HashSet::new();
    let mut fragments = Vec::with_capacity(records.len());
    for (lineno, r) in records {
        if r.start_line == 0 || r.start_line > r.end_line {
            return Err(manifest_err(path, lineno, format!("invalid line range {}-{}", r.start_line, r.end_line)));
        }
        if r.text.trim().is_empty() {
            return Err(manifest_err(path, lineno, "empty `text`"));
        }
        if !seen.insert((r.file.clone(), r.start_line)) {
            return Err(manifest_err(path, lineno, format!("duplicate fragment {}:{}", r.file, r.start_line)));
        }
        fragments.push(CodeFragment::new(0, r.file, r.start_line, r.end_line, r.name.unwrap_or_default(), r.text, cfg));
    }
    Ok(finalize(fragments, cfg, false))
}

/// Writes fragments in manifest form plus `id` and `loc`.
pub fn write_fragment_dump(path: &Path, fragments: &[CodeFragment]) -> Result<(), ExtractError> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for f in fragments {
        let record = DumpRecord {
            id: f.id,
            file: f.file.clone(),
            start_line: f.start_line,
            end_line: f.end_line,
            name: (!f.name.is_empty()).then(|| f.name.clone()),
            text: f.text.clone(),
            loc: f.loc,
        };
        serde_json::to_writer(&mut out, &record).map_err(|e| io_err(path, std::io::Error::other(e)))?;
        out.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Reads a dump written by [`write_fragment_dump`], keeping its ids and LOC
/// counts and re-tokenizing the text.
pub fn load_fragment_dump(path: &Path, mode: TokenizerMode) -> Result<Vec<CodeFragment>, ExtractError> {
    let records: Vec<(usize, DumpRecord)> = read_records(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (lineno, r) in records {
        if !seen.insert(r.id) {
            return Err(manifest_err(path, lineno, format!("duplicate id {}", r.id)));
        }
        let tokens = tokenize(&r.text, mode);
        out.push(CodeFragment {
            id: r.id,
            file: r.file,
            start_line: r.start_line,
            end_line: r.end_line,
            name: r.name.unwrap_or_default(),
            text: r.text,
            loc: r.loc,
            tokens,
        });
    }
    Ok(out)
}
