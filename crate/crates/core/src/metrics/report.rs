use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::CloneType;

/// Wall-clock per pipeline stage, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    pub parse_ms: f64,
    pub inference_ms: f64,
    pub index_build_ms: f64,
    pub search_ms: f64,
    pub total_ms: f64,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Raw stage durations collected while a run executes. Stages that did not
/// run stay at zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunRecord {
    pub parse: Duration,
    pub inference: Duration,
    pub index_build: Duration,
    pub search: Duration,
    pub total: Duration,
}

impl RunRecord {
    /// Runs `f` and returns its result with its monotonic wall-clock time.
    pub fn time<T>(f: impl FnOnce() -> T) -> (T, Duration) {
        let start = Instant::now();
        let out = f();
        (out, start.elapsed())
    }
}

/// Converts a run record to the reported millisecond breakdown. Parts are
/// measured independently, so they need not sum to the total.
pub fn timing_report(run: &RunRecord) -> Timing {
    Timing {
        parse_ms: ms(run.parse),
        inference_ms: ms(run.inference),
        index_build_ms: ms(run.index_build),
        search_ms: ms(run.search),
        total_ms: ms(run.total),
    }
}

/// Effectiveness summary of one evaluated run. Percent fields are in
/// `[0, 100]`; metrics whose inputs were not supplied are `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub truth_pairs: usize,
    pub detected_pairs: usize,
    pub overlap_threshold: f64,
    pub recall_overall: f64,
    pub recall_by_type: BTreeMap<CloneType, f64>,
    pub precision_strict: Option<f64>,
    pub precision_optimistic: Option<f64>,
    pub precision_pessimistic: Option<f64>,
    pub f_score: Option<f64>,
    pub mrr: Option<f64>,
    pub kappa: Option<f64>,
    pub observed_agreement: Option<f64>,
    pub timing: Option<Timing>,
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{x:.digits$}"))
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "truth pairs        {:>10}", self.truth_pairs)?;
        writeln!(f, "detected pairs     {:>10}", self.detected_pairs)?;
        writeln!(f, "overlap threshold  {:>10.2}", self.overlap_threshold)?;
        writeln!(f, "recall (%)         {:>10.2}", self.recall_overall)?;
        for (ty, r) in &self.recall_by_type {
            writeln!(f, "  {:<16} {:>10.2}", ty.as_str(), r)?;
        }
        writeln!(f, "precision (%)      {:>10}", opt(self.precision_strict, 2))?;
        writeln!(f, "  optimistic       {:>10}", opt(self.precision_optimistic, 2))?;
        writeln!(f, "  pessimistic      {:>10}", opt(self.precision_pessimistic, 2))?;
        writeln!(f, "F-score (%)        {:>10}", opt(self.f_score, 2))?;
        writeln!(f, "MRR                {:>10}", opt(self.mrr, 4))?;
        writeln!(f, "kappa              {:>10}", opt(self.kappa, 4))?;
        writeln!(f, "agreement (%)      {:>10}", opt(self.observed_agreement, 2))?;
        if let Some(t) = &self.timing {
            writeln!(f, "parse (ms)         {:>10.1}", t.parse_ms)?;
            writeln!(f, "inference (ms)     {:>10.1}", t.inference_ms)?;
            writeln!(f, "index build (ms)   {:>10.1}", t.index_build_ms)?;
            writeln!(f, "search (ms)        {:>10.1}", t.search_ms)?;
            writeln!(f, "total (ms)         {:>10.1}", t.total_ms)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_in_milliseconds() {
        let run = RunRecord {
            parse: Duration::from_micros(1500),
            inference: Duration::ZERO,
            index_build: Duration::from_millis(3),
            search: Duration::from_secs(2),
            total: Duration::from_secs(3),
        };
        let t = timing_report(&run);
        assert_eq!(t.parse_ms, 1.5);
        assert_eq!(t.inference_ms, 0.0);
        assert_eq!(t.search_ms, 2000.0);
        let json = serde_json::to_value(t).unwrap();
        for key in ["parse_ms", "inference_ms", "index_build_ms", "search_ms", "total_ms"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn table_marks_missing_metrics() {
        let r = EvalReport { recall_overall: 50.0, ..Default::default() };
        let shown = r.to_string();
        assert!(shown.contains("50.00"));
        assert!(shown.contains("F-score (%)                 -"));
    }
}
