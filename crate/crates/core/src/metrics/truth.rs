use std::path::Path;

use super::{CloneType, FragmentSpan, GroundTruthPair, MetricError};

/// Parses a positive 1-based line number field.
pub(crate) fn line_field(record: &csv::StringRecord, idx: usize, name: &str) -> Result<usize, String> {
    let raw = record.get(idx).ok_or_else(|| format!("missing column `{name}`"))?;
    match raw.trim().parse::<usize>() {
        Ok(0) => Err(format!("`{name}` must be at least 1")),
        Ok(v) => Ok(v),
        Err(e) => Err(format!("`{name}` = `{raw}`: {e}")),
    }
}

/// Reads `file,start,end` starting at column `at` as a span.
pub(crate) fn span_fields(record: &csv::StringRecord, at: usize, side: &str) -> Result<FragmentSpan, String> {
    let file = record.get(at).ok_or_else(|| format!("missing column `file_{side}`"))?.trim().to_owned();
    let start = line_field(record, at + 1, &format!("start_{side}"))?;
    let end = line_field(record, at + 2, &format!("end_{side}"))?;
    if start > end {
        return Err(format!("start_{side} {start} is after end_{side} {end}"));
    }
    Ok(FragmentSpan { file, start_line: start, end_line: end })
}

/// Whether the first row is a header (its `start_a` column is not a number).
pub(crate) fn looks_like_header(record: &csv::StringRecord) -> bool {
    record.get(1).is_some_and(|f| f.trim().parse::<usize>().is_err())
}

/// Reads `file_a,start_a,end_a,file_b,start_b,end_b,type` rows. A header row
/// is optional.
pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthPair>, MetricError> {
    let shown = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| MetricError::Io { path: shown.clone(), source: std::io::Error::other(e) })?;
    let mut out = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx as u64 + 1;
        let parse_err = |message: String| MetricError::Parse { path: shown.clone(), line, message };
        let record = row.map_err(|e| parse_err(e.to_string()))?;
        if idx == 0 && looks_like_header(&record) {
            continue;
        }
        if record.len() != 7 {
            return Err(parse_err(format!("expected 7 columns, found {}", record.len())));
        }
        let a = span_fields(&record, 0, "a").map_err(parse_err)?;
        let b = span_fields(&record, 3, "b").map_err(parse_err)?;
        let clone_type: CloneType = record[6].trim().parse().map_err(|e: MetricError| parse_err(e.to_string()))?;
        out.push(GroundTruthPair { a, b, clone_type });
    }
    Ok(out)
}
