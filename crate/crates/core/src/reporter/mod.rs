//! Turns per-query candidate lists into one deduplicated, ranked pair list
//! and writes it as CSV or JSON Lines.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::extractor::CodeFragment;
use crate::metrics::truth::{looks_like_header, span_fields};
use crate::metrics::{DetectedPair, FragmentSpan};
use crate::search::CloneCandidate;

pub const CSV_HEADER: [&str; 7] = ["file_a", "start_a", "end_a", "file_b", "start_b", "end_b", "similarity"];

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("pair ({a}, {b}) refers to unknown fragment {missing}")]
    UnknownFragment { a: u64, b: u64, missing: u64 },
    #[error("unknown report format `{0}` (expected csv or jsonl)")]
    UnknownFormat(String),
}

/// Ranks at which each direction reported the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub a_to_b: Option<u32>,
    pub b_to_a: Option<u32>,
}

/// Unordered clone pair with `a_id < b_id`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClonePair {
    pub a_id: u64,
    pub b_id: u64,
    /// Highest similarity of the two directions.
    pub similarity: f64,
    pub provenance: Provenance,
}

/// Merges directed candidates into unordered pairs. Only candidates with
/// `rank <= top_n` and `similarity >= floor` contribute. The result is keyed
/// and sorted by `(a_id, b_id)`.
pub fn collect_pairs(lists: &[Vec<CloneCandidate>], top_n: usize, floor: f64) -> Vec<ClonePair> {
    let mut pairs: BTreeMap<(u64, u64), ClonePair> = BTreeMap::new();
    for c in lists.iter().flatten() {
        if c.query_id == c.hit_id || c.rank as usize > top_n || c.similarity < floor {
            continue;
        }
        let key = (c.query_id.min(c.hit_id), c.query_id.max(c.hit_id));
        let entry = pairs.entry(key).or_insert(ClonePair {
            a_id: key.0,
            b_id: key.1,
            similarity: c.similarity,
            provenance: Provenance::default(),
        });
        entry.similarity = entry.similarity.max(c.similarity);
        let slot = if c.query_id == key.0 { &mut entry.provenance.a_to_b } else { &mut entry.provenance.b_to_a };
        *slot = Some(slot.map_or(c.rank, |r| r.min(c.rank)));
    }
    pairs.into_values().collect()
}

fn pair_order(x: &ClonePair, y: &ClonePair) -> Ordering {
    y.similarity.total_cmp(&x.similarity).then(x.a_id.cmp(&y.a_id)).then(x.b_id.cmp(&y.b_id))
}

/// Descending similarity, ties by `(a_id, b_id)`.
pub fn merge_rank(mut pairs: Vec<ClonePair>) -> Vec<ClonePair> {
    pairs.sort_by(pair_order);
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Jsonl,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Jsonl => "jsonl",
        }
    }

    /// Guesses from the file extension; anything but `.jsonl` / `.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json") => ReportFormat::Jsonl,
            _ => ReportFormat::Csv,
        }
    }
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "jsonl" => Ok(ReportFormat::Jsonl),
            _ => Err(ReportError::UnknownFormat(s.to_owned())),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

/// One JSONL report line: the pair plus both fragments' coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub a_id: u64,
    pub b_id: u64,
    pub similarity: f64,
    pub provenance: Provenance,
    pub file_a: String,
    pub start_a: usize,
    pub end_a: usize,
    pub file_b: String,
    pub start_b: usize,
    pub end_b: usize,
}

impl ReportRow {
    pub fn pair(&self) -> ClonePair {
        ClonePair { a_id: self.a_id, b_id: self.b_id, similarity: self.similarity, provenance: self.provenance }
    }

    pub fn detected(&self) -> DetectedPair {
        DetectedPair {
            a: FragmentSpan::new(self.file_a.clone(), self.start_a, self.end_a),
            b: FragmentSpan::new(self.file_b.clone(), self.start_b, self.end_b),
            similarity: self.similarity,
        }
    }
}

/// Joins pairs with fragment coordinates.
pub fn report_rows(pairs: &[ClonePair], fragments: &[CodeFragment]) -> Result<Vec<ReportRow>, ReportError> {
    let by_id: HashMap<u64, &CodeFragment> = fragments.iter().map(|f| (f.id, f)).collect();
    pairs
        .iter()
        .map(|p| {
            let get =
                |id| by_id.get(&id).copied().ok_or(ReportError::UnknownFragment { a: p.a_id, b: p.b_id, missing: id });
            let (fa, fb) = (get(p.a_id)?, get(p.b_id)?);
            Ok(ReportRow {
                a_id: p.a_id,
                b_id: p.b_id,
                similarity: p.similarity,
                provenance: p.provenance,
                file_a: fa.file.clone(),
                start_a: fa.start_line,
                end_a: fa.end_line,
                file_b: fb.file.clone(),
                start_b: fb.start_line,
                end_b: fb.end_line,
            })
        })
        .collect()
}

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io { path: path.display().to_string(), source }
}

/// Writes rows in `format`. The file is written under a temporary name and
/// renamed into place; on failure nothing is left at `path`.
pub fn write_report(rows: &[ReportRow], format: ReportFormat, path: &Path) -> Result<(), ReportError> {
    let tmp = path.with_extension(format!("{}.tmp", format.extension()));
    let result = write_rows(rows, format, &tmp).and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(path, e));
    }
    Ok(())
}

fn write_rows(rows: &[ReportRow], format: ReportFormat, path: &Path) -> std::io::Result<()> {
    let file = fs::File::create(path)?;
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(BufWriter::new(file));
            w.write_record(CSV_HEADER)?;
            for r in rows {
                w.write_record([
                    r.file_a.as_str(),
                    &r.start_a.to_string(),
                    &r.end_a.to_string(),
                    &r.file_b,
                    &r.start_b.to_string(),
                    &r.end_b.to_string(),
                    &format!("{:.6}", r.similarity),
                ])?;
            }
            w.flush()?;
        }
        ReportFormat::Jsonl => {
            let mut w = BufWriter::new(file);
            for r in rows {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Reads a JSONL report. Blank lines are skipped.
pub fn read_jsonl(path: &Path) -> Result<Vec<ReportRow>, ReportError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| ReportError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(row);
    }
    Ok(out)
}

/// Reads a CSV report (header optional).
pub fn read_csv(path: &Path) -> Result<Vec<DetectedPair>, ReportError> {
    let shown = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| io_err(path, std::io::Error::other(e)))?;
    let mut out = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let parse_err = |message: String| ReportError::Parse { path: shown.clone(), line: idx + 1, message };
        let record = row.map_err(|e| parse_err(e.to_string()))?;
        if idx == 0 && looks_like_header(&record) {
            continue;
        }
        if record.len() != CSV_HEADER.len() {
            return Err(parse_err(format!("expected {} columns, found {}", CSV_HEADER.len(), record.len())));
        }
        let a = span_fields(&record, 0, "a").map_err(parse_err)?;
        let b = span_fields(&record, 3, "b").map_err(parse_err)?;
        let similarity: f64 = record[6].trim().parse().map_err(|e| parse_err(format!("similarity: {e}")))?;
        out.push(DetectedPair { a, b, similarity });
    }
    Ok(out)
}

/// Reads either report format as detected pairs, choosing by extension.
pub fn read_report(path: &Path) -> Result<Vec<DetectedPair>, ReportError> {
    match ReportFormat::from_path(path) {
        ReportFormat::Csv => read_csv(path),
        ReportFormat::Jsonl => Ok(read_jsonl(path)?.iter().map(ReportRow::detected).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::ExtractionConfig;

    fn cand(q: u64, h: u64, sim: f64, rank: u32) -> CloneCandidate {
        CloneCandidate { query_id: q, hit_id: h, similarity: sim, rank }
    }

    fn frag(id: u64, file: &str, start: usize) -> CodeFragment {
        let text = "int f(int a) {\n  a++;\n  a++;\n  a++;\n  a++;\n  return a;\n}\n";
        CodeFragment::new(id, file, start, start + 6, "f", text, &ExtractionConfig::default())
    }

    #[test]
    fn symmetric_hits_collapse() {
        let lists = vec![vec![cand(0, 1, 0.97, 1)], vec![cand(1, 0, 0.97, 1)]];
        let pairs = collect_pairs(&lists, 10, 0.95);
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].a_id, pairs[0].b_id, pairs[0].similarity), (0, 1, 0.97));
        assert_eq!(pairs[0].provenance, Provenance { a_to_b: Some(1), b_to_a: Some(1) });
    }

    #[test]
    fn one_direction_is_enough() {
        let lists = vec![vec![], vec![cand(1, 0, 0.96, 1)]];
        let pairs = collect_pairs(&lists, 10, 0.95);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].similarity, 0.96);
        assert_eq!(pairs[0].provenance, Provenance { a_to_b: None, b_to_a: Some(1) });
    }

    #[test]
    fn asymmetric_scores_take_the_max() {
        let lists = vec![vec![cand(2, 5, 0.96, 2)], vec![cand(5, 2, 0.98, 1)]];
        assert_eq!(collect_pairs(&lists, 10, 0.0)[0].similarity, 0.98);
    }

    #[test]
    fn top_one_over_three_fragments() {
        // A=0, B=1, C=2; each list is already sorted.
        let lists = vec![
            vec![cand(0, 1, 0.99, 1), cand(0, 2, 0.96, 2)],
            vec![cand(1, 0, 0.99, 1), cand(1, 2, 0.97, 2)],
            vec![cand(2, 1, 0.97, 1), cand(2, 0, 0.96, 2)],
        ];
        let got: Vec<(u64, u64)> = collect_pairs(&lists, 1, 0.95).iter().map(|p| (p.a_id, p.b_id)).collect();
        assert_eq!(got, vec![(0, 1), (1, 2)]);
        assert_eq!(collect_pairs(&lists, 2, 0.95).len(), 3);
        assert_eq!(collect_pairs(&lists, 2, 0.98).len(), 1);
    }

    #[test]
    fn ranking_and_ties() {
        let p = |a, b, s| ClonePair { a_id: a, b_id: b, similarity: s, provenance: Provenance::default() };
        let ranked = merge_rank(vec![p(0, 1, 0.95), p(3, 4, 0.97), p(1, 2, 0.99), p(0, 4, 0.97)]);
        let got: Vec<(u64, u64)> = ranked.iter().map(|x| (x.a_id, x.b_id)).collect();
        assert_eq!(got, vec![(1, 2), (0, 4), (3, 4), (0, 1)]);
        assert_eq!(merge_rank(ranked.clone()), ranked);
        assert!(merge_rank(Vec::new()).is_empty());
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let frags = vec![frag(0, "a.c", 1), frag(1, "b.c", 10), frag(2, "c.c", 20)];
        let pairs = merge_rank(collect_pairs(&[vec![cand(0, 1, 0.96, 1)], vec![cand(1, 2, 1.0, 1)]], 10, 0.0));
        write_report(&report_rows(&pairs, &frags).unwrap(), ReportFormat::Csv, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "file_a,start_a,end_a,file_b,start_b,end_b,similarity");
        assert_eq!(lines[1], "b.c,10,16,c.c,20,26,1.000000");
        assert_eq!(lines[2], "a.c,1,7,b.c,10,16,0.960000");
        let back = read_report(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].a, FragmentSpan::new("a.c", 1, 7));
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let frags = vec![frag(0, "a.c", 1), frag(1, "b.c", 10)];
        let pairs = collect_pairs(&[vec![cand(0, 1, 0.96, 1)]], 10, 0.0);
        write_report(&report_rows(&pairs, &frags).unwrap(), ReportFormat::Jsonl, &path).unwrap();
        let back: Vec<ClonePair> = read_jsonl(&path).unwrap().iter().map(ReportRow::pair).collect();
        assert_eq!(back, pairs);
    }

    #[test]
    fn unknown_fragment_and_bad_rows() {
        let pairs = collect_pairs(&[vec![cand(0, 9, 0.96, 1)]], 10, 0.0);
        assert!(matches!(
            report_rows(&pairs, &[frag(0, "a.c", 1)]),
            Err(ReportError::UnknownFragment { missing: 9, .. })
        ));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "file_a,start_a,end_a,file_b,start_b,end_b,similarity\na.c,1,5,b.c,2,x,0.9\n").unwrap();
        assert!(matches!(read_report(&path), Err(ReportError::Parse { line: 2, .. })));
    }

    #[test]
    fn failed_write_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("r.csv");
        assert!(write_report(&[], ReportFormat::Csv, &path).is_err());
        assert!(!path.exists());
    }
}
