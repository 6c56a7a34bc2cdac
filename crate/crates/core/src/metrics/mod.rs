//! Effectiveness and efficiency metrics for clone detection runs.
//!
//! Recall is computed against a ground-truth pair list with line-overlap
//! matching, precision from a two-reviewer sample, plus F-score, mean
//! reciprocal rank and Cohen's kappa. Percent-valued metrics are in
//! `[0, 100]`; recall helpers and MRR return fractions.

mod report;
pub(crate) mod truth;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use report::{timing_report, EvalReport, RunRecord, Timing};
pub use truth::load_ground_truth;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("recall is undefined for an empty ground truth")]
    EmptyTruth,
    #[error("no agreed review cases; strict precision is undefined")]
    NoAgreement,
    #[error("review table is empty")]
    EmptyReview,
    #[error("kappa is undefined when chance agreement is 1")]
    DegenerateMarginals,
    #[error("mean reciprocal rank needs at least one query")]
    NoQueries,
    #[error("overlap threshold {0} is outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("unknown clone type `{0}`")]
    UnknownCloneType(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// File plus inclusive 1-based line range.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FragmentSpan {
    pub file: String,
    pub start_line: usize,
    pub end_line: usize,
}

impl FragmentSpan {
    pub fn new(file: impl Into<String>, start_line: usize, end_line: usize) -> Self {
        FragmentSpan { file: file.into(), start_line, end_line }
    }

    pub fn line_count(&self) -> usize {
        self.end_line + 1 - self.start_line
    }

    /// Lines shared with `other`; zero for different files.
    pub fn intersection(&self, other: &FragmentSpan) -> usize {
        if self.file != other.file {
            return 0;
        }
        let lo = self.start_line.max(other.start_line);
        let hi = self.end_line.min(other.end_line);
        if hi < lo {
            0
        } else {
            hi + 1 - lo
        }
    }

    /// Fraction of `self` covered by `by`.
    pub fn coverage_by(&self, by: &FragmentSpan) -> f64 {
        self.intersection(by) as f64 / self.line_count() as f64
    }
}

/// Clone categories: exact, renamed, and four syntactic-similarity bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CloneType {
    T1,
    T2,
    VST3,
    ST3,
    MT3,
    WT3T4,
}

impl CloneType {
    pub const ALL: [CloneType; 6] =
        [CloneType::T1, CloneType::T2, CloneType::VST3, CloneType::ST3, CloneType::MT3, CloneType::WT3T4];

    pub fn as_str(self) -> &'static str {
        match self {
            CloneType::T1 => "T1",
            CloneType::T2 => "T2",
            CloneType::VST3 => "VST3",
            CloneType::ST3 => "ST3",
            CloneType::MT3 => "MT3",
            CloneType::WT3T4 => "WT3T4",
        }
    }
}

impl fmt::Display for CloneType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CloneType {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        match key.to_ascii_uppercase().as_str() {
            "T1" | "1" => Ok(CloneType::T1),
            "T2" | "2" => Ok(CloneType::T2),
            "VST3" => Ok(CloneType::VST3),
            "ST3" => Ok(CloneType::ST3),
            "MT3" => Ok(CloneType::MT3),
            "WT3T4" | "WT3" | "T4" => Ok(CloneType::WT3T4),
            _ => Err(MetricError::UnknownCloneType(s.to_owned())),
        }
    }
}

/// A known clone pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthPair {
    pub a: FragmentSpan,
    pub b: FragmentSpan,
    pub clone_type: CloneType,
}

/// A reported clone pair, by coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedPair {
    pub a: FragmentSpan,
    pub b: FragmentSpan,
    pub similarity: f64,
}

fn check_threshold(threshold: f64) -> Result<(), MetricError> {
    if threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(MetricError::InvalidThreshold(threshold))
    }
}

fn covers(truth: &FragmentSpan, detected: &FragmentSpan, threshold: f64) -> bool {
    // Integer comparison up to rounding noise in `threshold * lines`.
    truth.intersection(detected) as f64 >= threshold * truth.line_count() as f64 - 1e-9
}

/// Whether a detected pair matches a truth pair: in one of the two pairings,
/// each truth fragment has at least `threshold` of its lines covered by the
/// detected fragment it is paired with.
pub fn match_overlap(a: &FragmentSpan, b: &FragmentSpan, truth: &GroundTruthPair, threshold: f64) -> bool {
    (covers(&truth.a, a, threshold) && covers(&truth.b, b, threshold))
        || (covers(&truth.a, b, threshold) && covers(&truth.b, a, threshold))
}

fn file_key<'a>(x: &'a str, y: &'a str) -> (&'a str, &'a str) {
    if x <= y {
        (x, y)
    } else {
        (y, x)
    }
}

/// Per-truth-pair flag: matched by at least one detected pair.
pub fn matched_truth(
    detected: &[DetectedPair],
    truth: &[GroundTruthPair],
    threshold: f64,
) -> Result<Vec<bool>, MetricError> {
    check_threshold(threshold)?;
    let mut by_files: HashMap<(&str, &str), Vec<&DetectedPair>> = HashMap::new();
    for d in detected {
        by_files.entry(file_key(&d.a.file, &d.b.file)).or_default().push(d);
    }
    Ok(truth
        .iter()
        .map(|t| {
            by_files
                .get(&file_key(&t.a.file, &t.b.file))
                .is_some_and(|ds| ds.iter().any(|d| match_overlap(&d.a, &d.b, t, threshold)))
        })
        .collect())
}

/// Fraction of truth pairs matched by some detected pair.
pub fn recall(detected: &[DetectedPair], truth: &[GroundTruthPair], threshold: f64) -> Result<f64, MetricError> {
    if truth.is_empty() {
        return Err(MetricError::EmptyTruth);
    }
    let hits = matched_truth(detected, truth, threshold)?;
    Ok(hits.iter().filter(|h| **h).count() as f64 / truth.len() as f64)
}

/// Recall restricted to each clone type present in the truth. Types without
/// truth pairs are absent from the map.
pub fn recall_by_type(
    detected: &[DetectedPair],
    truth: &[GroundTruthPair],
    threshold: f64,
) -> Result<BTreeMap<CloneType, f64>, MetricError> {
    let hits = matched_truth(detected, truth, threshold)?;
    let mut tally: BTreeMap<CloneType, (usize, usize)> = BTreeMap::new();
    for (t, hit) in truth.iter().zip(hits) {
        let e = tally.entry(t.clone_type).or_default();
        e.0 += usize::from(hit);
        e.1 += 1;
    }
    Ok(tally.into_iter().map(|(ty, (hit, n))| (ty, hit as f64 / n as f64)).collect())
}

/// Band of a syntactic similarity in `[0, 1]`. Lower bounds are inclusive.
pub fn classify_type_band(syntactic_similarity: f64) -> CloneType {
    if syntactic_similarity >= 0.9 {
        CloneType::VST3
    } else if syntactic_similarity >= 0.7 {
        CloneType::ST3
    } else if syntactic_similarity >= 0.5 {
        CloneType::MT3
    } else {
        CloneType::WT3T4
    }
}

/// Two-reviewer verdicts on a sample of reported clone candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReviewTable {
    pub both_clone: u64,
    /// First reviewer says clone, second says not.
    pub first_only: u64,
    /// Second reviewer says clone, first says not.
    pub second_only: u64,
    pub both_non: u64,
}

impl ReviewTable {
    pub fn new(both_clone: u64, first_only: u64, second_only: u64, both_non: u64) -> Self {
        ReviewTable { both_clone, first_only, second_only, both_non }
    }

    pub fn total(&self) -> u64 {
        self.both_clone + self.first_only + self.second_only + self.both_non
    }

    pub fn agreed(&self) -> u64 {
        self.both_clone + self.both_non
    }

    pub fn disagreed(&self) -> u64 {
        self.first_only + self.second_only
    }

    /// The same table with the two reviewers swapped.
    pub fn transposed(&self) -> Self {
        ReviewTable { first_only: self.second_only, second_only: self.first_only, ..*self }
    }
}

impl FromStr for ReviewTable {
    type Err = String;

    /// `both_clone,first_only,second_only,both_non`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<u64> = s
            .split(',')
            .map(|p| p.trim().parse::<u64>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [a, b, c, d] => Ok(ReviewTable::new(a, b, c, d)),
            _ => Err(format!("expected four comma-separated counts, got {}", parts.len())),
        }
    }
}

/// Precision estimates from a review sample, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionTriple {
    /// Agreed clones over all agreed cases.
    pub strict: f64,
    /// Agreed clones plus every disagreement, over all cases.
    pub optimistic: f64,
    /// Agreed clones over all cases.
    pub pessimistic: f64,
}

pub fn precision_from_sample(review: &ReviewTable) -> Result<PrecisionTriple, MetricError> {
    let total = review.total();
    if total == 0 {
        return Err(MetricError::EmptyReview);
    }
    if review.agreed() == 0 {
        return Err(MetricError::NoAgreement);
    }
    let pct = |num: u64, den: u64| 100.0 * num as f64 / den as f64;
    Ok(PrecisionTriple {
        strict: pct(review.both_clone, review.agreed()),
        optimistic: pct(review.both_clone + review.disagreed(), total),
        pessimistic: pct(review.both_clone, total),
    })
}

/// Share of cases on which both reviewers gave the same verdict.
pub fn observed_agreement(review: &ReviewTable) -> Result<f64, MetricError> {
    match review.total() {
        0 => Err(MetricError::EmptyReview),
        n => Ok(review.agreed() as f64 / n as f64),
    }
}

/// Cohen's kappa, `(p_o - p_e) / (1 - p_e)`, with `p_e` from the product of
/// the reviewers' marginal clone / non-clone rates.
pub fn cohen_kappa(review: &ReviewTable) -> Result<f64, MetricError> {
    let n = review.total() as f64;
    if n == 0.0 {
        return Err(MetricError::EmptyReview);
    }
    let p_o = review.agreed() as f64 / n;
    let first_clone = (review.both_clone + review.first_only) as f64 / n;
    let second_clone = (review.both_clone + review.second_only) as f64 / n;
    let p_e = first_clone * second_clone + (1.0 - first_clone) * (1.0 - second_clone);
    if (1.0 - p_e).abs() < 1e-12 {
        return Err(MetricError::DegenerateMarginals);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Harmonic mean `2PR / (P + R)`; zero when both are zero.
pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Mean reciprocal rank. Each inner slice marks relevance by rank (index 0
/// is rank 1); a query without a relevant result contributes 0.
pub fn mrr<L: AsRef<[bool]>>(lists: &[L]) -> Result<f64, MetricError> {
    if lists.is_empty() {
        return Err(MetricError::NoQueries);
    }
    let sum: f64 = lists.iter().map(|l| l.as_ref().iter().position(|r| *r).map_or(0.0, |i| 1.0 / (i + 1) as f64)).sum();
    Ok(sum / lists.len() as f64)
}

/// Reciprocal-rank lists reconstructed from a pair report: every fragment
/// that appears in the report is a query, its list holds the pairs it takes
/// part in by descending similarity, and a hit is relevant when the pair
/// matches a truth pair.
pub fn relevance_lists(
    detected: &[DetectedPair],
    truth: &[GroundTruthPair],
    threshold: f64,
) -> Result<Vec<Vec<bool>>, MetricError> {
    check_threshold(threshold)?;
    let mut by_files: HashMap<(&str, &str), Vec<&GroundTruthPair>> = HashMap::new();
    for t in truth {
        by_files.entry(file_key(&t.a.file, &t.b.file)).or_default().push(t);
    }
    let relevant: Vec<bool> = detected
        .iter()
        .map(|d| {
            by_files
                .get(&file_key(&d.a.file, &d.b.file))
                .is_some_and(|ts| ts.iter().any(|t| match_overlap(&d.a, &d.b, t, threshold)))
        })
        .collect();

    let mut per_query: BTreeMap<&FragmentSpan, Vec<(f64, &FragmentSpan, bool)>> = BTreeMap::new();
    for (d, rel) in detected.iter().zip(relevant) {
        per_query.entry(&d.a).or_default().push((d.similarity, &d.b, rel));
        per_query.entry(&d.b).or_default().push((d.similarity, &d.a, rel));
    }
    Ok(per_query
        .into_values()
        .map(|mut hits| {
            hits.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(y.1)));
            hits.into_iter().map(|(_, _, rel)| rel).collect()
        })
        .collect())
}
