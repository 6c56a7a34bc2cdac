//! End-to-end commands: detect, eval, embed-cache and bench.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, RunConfig};
use crate::embedder::{embed_batch, load_embeddings, save_embeddings, CacheError, EmbedError, EmbeddingVector};
use crate::extractor::{
    extract_fragments, load_fragment_dump, load_manifest, write_fragment_dump, CodeFragment, ExtractError,
    ExtractionConfig, Language,
};
use crate::metrics::{
    cohen_kappa, f_score, load_ground_truth, mrr, observed_agreement, precision_from_sample, recall, recall_by_type,
    relevance_lists, timing_report, EvalReport, MetricError, ReviewTable, RunRecord, Timing,
};
use crate::reporter::{
    collect_pairs, merge_rank, read_report, report_rows, write_report, ReportError, ReportFormat, ReportRow,
};
use crate::search::{
    build_index, save_hnsw, search_all, ExactIndex, HnswIndex, HnswParams, NeighborIndex, SearchError, SearchParams,
    SearchType,
};
use crate::synth::random_unit_vectors;

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSONL: &str = "report.jsonl";
pub const TIMING_JSON: &str = "timing.json";
pub const CACHE_FRAGMENTS: &str = "fragments.jsonl";
pub const CACHE_EMBEDDINGS: &str = "embeddings.bin";
pub const CACHE_META: &str = "cache.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl PipelineError {
    /// 1 for problems with the user's input or configuration, 2 for
    /// failures of the environment or of the program itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Io { .. } => 2,
            PipelineError::Embed(EmbedError::Remote(_) | EmbedError::Batch { .. }) => 2,
            PipelineError::Cache(CacheError::Io { .. }) => 2,
            PipelineError::Extract(ExtractError::Io { .. }) => 2,
            PipelineError::Report(ReportError::Io { .. } | ReportError::UnknownFragment { .. }) => 2,
            PipelineError::Search(SearchError::Io { .. }) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

/// Settings that decide whether cached embeddings can be reused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheMeta {
    extraction: ExtractionConfig,
    provider: String,
    model: String,
    dimension: usize,
    code_length: usize,
    hash_seed: u64,
    input: Option<PathBuf>,
}

impl CacheMeta {
    fn of(cfg: &RunConfig) -> Self {
        CacheMeta {
            extraction: cfg.extraction.clone(),
            provider: cfg.embedder.provider.to_string(),
            model: cfg.embedder.model_name.clone(),
            dimension: cfg.embedder.dimension,
            code_length: cfg.embedder.code_length,
            hash_seed: cfg.embedder.seed,
            input: cfg.manifest.clone().or_else(|| cfg.source.clone()),
        }
    }
}

/// Fragments and embeddings, with the time spent producing them.
#[derive(Debug, Clone)]
pub struct Embedded {
    pub fragments: Vec<CodeFragment>,
    pub vectors: Vec<EmbeddingVector>,
    pub parse: Duration,
    pub inference: Duration,
    /// Whether both came from the cache.
    pub cached: bool,
}

fn extract(cfg: &RunConfig) -> Result<Vec<CodeFragment>, PipelineError> {
    if let Some(manifest) = &cfg.manifest {
        let ecfg = ExtractionConfig { language: Language::Manifest, ..cfg.extraction.clone() };
        return Ok(load_manifest(manifest, &ecfg)?);
    }
    let source =
        cfg.source.as_ref().ok_or_else(|| PipelineError::Usage("no input: set `source` or `manifest`".into()))?;
    Ok(extract_fragments(source, &cfg.extraction)?)
}

type Cached = (Vec<CodeFragment>, Vec<EmbeddingVector>);

fn read_cache(cfg: &RunConfig, dir: &Path) -> Result<Option<Cached>, PipelineError> {
    let meta_path = dir.join(CACHE_META);
    let Ok(text) = fs::read_to_string(&meta_path) else {
        return Ok(None);
    };
    match serde_json::from_str::<CacheMeta>(&text) {
        Ok(meta) if meta == CacheMeta::of(cfg) => {}
        _ => {
            log::warn!("{}: cache was built with different settings; recomputing", dir.display());
            return Ok(None);
        }
    }
    let fragments = load_fragment_dump(&dir.join(CACHE_FRAGMENTS), cfg.extraction.tokenizer_mode)?;
    let vectors = load_embeddings(&dir.join(CACHE_EMBEDDINGS))?;
    Ok(Some((fragments, vectors)))
}

fn write_cache(
    cfg: &RunConfig,
    dir: &Path,
    fragments: &[CodeFragment],
    vectors: &[EmbeddingVector],
) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let meta_path = dir.join(CACHE_META);
    // the meta file marks the cache complete, so it goes last
    let _ = fs::remove_file(&meta_path);
    write_fragment_dump(&dir.join(CACHE_FRAGMENTS), fragments)?;
    save_embeddings(&dir.join(CACHE_EMBEDDINGS), vectors)?;
    let meta = serde_json::to_string_pretty(&CacheMeta::of(cfg)).expect("cache meta serializes");
    fs::write(&meta_path, meta).map_err(io_err(&meta_path))?;
    Ok(())
}

/// Extracts and embeds, reusing `cfg.cache_dir` when it holds a complete
/// cache built with the same settings and refreshing it otherwise.
pub fn load_or_embed(cfg: &RunConfig) -> Result<Embedded, PipelineError> {
    if let Some(dir) = &cfg.cache_dir {
        let (hit, parse) = RunRecord::time(|| read_cache(cfg, dir));
        if let Some((fragments, vectors)) = hit? {
            log::info!("{}: reusing {} cached embeddings", dir.display(), vectors.len());
            return Ok(Embedded { fragments, vectors, parse, inference: Duration::ZERO, cached: true });
        }
    }
    let (fragments, parse) = RunRecord::time(|| extract(cfg));
    let fragments = fragments?;
    let (vectors, inference) = RunRecord::time(|| embed_batch(&fragments, &cfg.embedder));
    let vectors = vectors?;
    if let Some(dir) = &cfg.cache_dir {
        write_cache(cfg, dir, &fragments, &vectors)?;
    }
    Ok(Embedded { fragments, vectors, parse, inference, cached: false })
}

/// What a detection run produced.
#[derive(Debug, Clone)]
pub struct DetectOutcome {
    pub report_csv: PathBuf,
    pub report_jsonl: PathBuf,
    pub timing_path: Option<PathBuf>,
    pub rows: Vec<ReportRow>,
    pub fragments: usize,
    pub embedded: usize,
    pub cached: bool,
    pub timing: Timing,
}

/// Removes files written by a run unless it is disarmed.
struct Cleanup(Vec<PathBuf>);

impl Cleanup {
    fn disarm(mut self) {
        self.0.clear();
    }
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        for p in &self.0 {
            let _ = fs::remove_file(p);
        }
    }
}

/// Runs extract, embed, index, search and merge, then writes
/// `report.csv`, `report.jsonl` and (when instrumented) `timing.json` into
/// `cfg.output_dir`. On failure, files written by this run are removed.
pub fn cmd_detect(cfg: &RunConfig) -> Result<DetectOutcome, PipelineError> {
    cmd_detect_with_index(cfg, None)
}

/// As [`cmd_detect`], additionally saving the HNSW index to `index_out`.
pub fn cmd_detect_with_index(cfg: &RunConfig, index_out: Option<&Path>) -> Result<DetectOutcome, PipelineError> {
    let start = Instant::now();
    cfg.validate()?;
    if index_out.is_some() && cfg.search.search_type != SearchType::Hnsw {
        return Err(PipelineError::Usage("saving an index needs search_type = hnsw".into()));
    }
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut run = RunRecord::default();

    let data = load_or_embed(cfg)?;
    run.parse = data.parse;
    run.inference = data.inference;
    if data.fragments.is_empty() {
        log::warn!("no fragments found; writing an empty report");
    }

    let mut cleanup = Cleanup(Vec::new());
    let (lists, index_build, search) = match cfg.search.search_type {
        SearchType::Exact => {
            let (index, t_build) = RunRecord::time(|| build_index(&data.vectors, &cfg.search, &cfg.hnsw));
            let index = index?;
            let (lists, t_search) = RunRecord::time(|| search_all(index.as_ref(), &cfg.search));
            (lists?, t_build, t_search)
        }
        SearchType::Hnsw => {
            let (index, t_build) = RunRecord::time(|| HnswIndex::build(&data.vectors, &cfg.hnsw));
            let index = index?;
            if let Some(path) = index_out {
                save_hnsw(&index, path)?;
                cleanup.0.push(path.to_path_buf());
            }
            let (lists, t_search) = RunRecord::time(|| search_all(&index, &cfg.search));
            (lists?, t_build, t_search)
        }
    };
    run.index_build = index_build;
    run.search = search;

    let pairs = merge_rank(collect_pairs(&lists, cfg.search.k, cfg.search.similarity_floor));
    let rows = report_rows(&pairs, &data.fragments)?;
    let report_csv = out.join(REPORT_CSV);
    let report_jsonl = out.join(REPORT_JSONL);
    write_report(&rows, ReportFormat::Csv, &report_csv)?;
    cleanup.0.push(report_csv.clone());
    write_report(&rows, ReportFormat::Jsonl, &report_jsonl)?;
    cleanup.0.push(report_jsonl.clone());

    run.total = start.elapsed();
    let timing = timing_report(&run);
    let timing_path = if cfg.instrument {
        let path = out.join(TIMING_JSON);
        let text = serde_json::to_string_pretty(&timing).expect("timing serializes");
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
        Some(path)
    } else {
        None
    };
    cleanup.disarm();
    Ok(DetectOutcome {
        report_csv,
        report_jsonl,
        timing_path,
        rows,
        fragments: data.fragments.len(),
        embedded: data.vectors.len(),
        cached: data.cached,
        timing,
    })
}

/// Extracts and embeds into `cfg.cache_dir`.
pub fn cmd_embed_cache(cfg: &RunConfig) -> Result<Embedded, PipelineError> {
    cfg.validate()?;
    let dir = cfg.cache_dir.as_ref().ok_or_else(|| PipelineError::Usage("embed-cache needs `cache_dir`".into()))?;
    let (fragments, parse) = RunRecord::time(|| extract(cfg));
    let fragments = fragments?;
    let (vectors, inference) = RunRecord::time(|| embed_batch(&fragments, &cfg.embedder));
    let vectors = vectors?;
    write_cache(cfg, dir, &fragments, &vectors)?;
    Ok(Embedded { fragments, vectors, parse, inference, cached: false })
}

/// Inputs of an evaluation beyond the report and the truth file.
#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub overlap_threshold: f64,
    /// Manual review counts, enabling precision, F-score and kappa.
    pub review: Option<ReviewTable>,
    /// A `timing.json` to attach.
    pub timing: Option<PathBuf>,
}

/// Scores a report against ground truth.
pub fn cmd_eval(report: &Path, truth: &Path, opts: &EvalOptions) -> Result<EvalReport, PipelineError> {
    let detected = read_report(report)?;
    let truth_pairs = load_ground_truth(truth)?;
    let threshold = opts.overlap_threshold;
    let overall = recall(&detected, &truth_pairs, threshold)? * 100.0;
    let by_type: BTreeMap<_, _> =
        recall_by_type(&detected, &truth_pairs, threshold)?.into_iter().map(|(k, v)| (k, v * 100.0)).collect();
    let mrr = match mrr(&relevance_lists(&detected, &truth_pairs, threshold)?) {
        Ok(v) => Some(v),
        Err(MetricError::NoQueries) => None,
        Err(e) => return Err(e.into()),
    };
    let mut eval = EvalReport {
        truth_pairs: truth_pairs.len(),
        detected_pairs: detected.len(),
        overlap_threshold: threshold,
        recall_overall: overall,
        recall_by_type: by_type,
        mrr,
        ..Default::default()
    };
    if let Some(review) = &opts.review {
        let p = precision_from_sample(review)?;
        eval.precision_strict = Some(p.strict);
        eval.precision_optimistic = Some(p.optimistic);
        eval.precision_pessimistic = Some(p.pessimistic);
        eval.f_score = Some(f_score(p.strict, overall));
        eval.observed_agreement = Some(observed_agreement(review)? * 100.0);
        eval.kappa = Some(cohen_kappa(review)?);
    }
    if let Some(path) = &opts.timing {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let timing: Timing = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Usage(format!("{}: not a timing file: {e}", path.display())))?;
        eval.timing = Some(timing);
    }
    Ok(eval)
}

/// Parameters of a synthetic exact-versus-HNSW comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n: usize,
    pub dimension: usize,
    pub k: usize,
    /// Queries timed on each back end, taken evenly across the data set.
    pub queries: usize,
    pub ef_search: usize,
    pub hnsw: HnswParams,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n: 10_000,
            dimension: 768,
            k: 10,
            queries: 1000,
            ef_search: 120,
            hnsw: HnswParams::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub build_ms: f64,
    /// Single-threaded wall clock over all timed queries.
    pub search_ms: f64,
    /// Mean recall@k against exact search.
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub queries: usize,
    pub exact: BenchRow,
    pub hnsw: BenchRow,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(
            f,
            "N={} D={} k={} queries={} M={} efC={} efS={}",
            c.n, c.dimension, c.k, self.queries, c.hnsw.m, c.hnsw.ef_construction, c.ef_search
        )?;
        writeln!(f, "{:<8} {:>12} {:>14} {:>14}", "search", "recall@k", "build (ms)", "search (ms)")?;
        for (name, row) in [("exact", &self.exact), ("hnsw", &self.hnsw)] {
            writeln!(f, "{:<8} {:>12.4} {:>14.1} {:>14.1}", name, row.recall, row.build_ms, row.search_ms)?;
        }
        Ok(())
    }
}

/// Query ids spread evenly over `0..n`.
pub fn bench_queries(n: usize, count: usize) -> Vec<u64> {
    let count = count.min(n).max(1);
    (0..count).map(|i| (i * n / count) as u64).collect()
}

/// Times exact and HNSW search over seeded random unit vectors and reports
/// HNSW recall@k against the exact lists.
pub fn cmd_bench(cfg: &BenchConfig) -> Result<BenchReport, PipelineError> {
    if cfg.n < 100 {
        return Err(PipelineError::Usage(format!("bench needs N >= 100, got {}", cfg.n)));
    }
    let params =
        SearchParams { search_type: SearchType::Exact, k: cfg.k, ef_search: cfg.ef_search, similarity_floor: -1.0 };
    SearchParams { search_type: SearchType::Hnsw, ..params }.validate()?;
    let vectors = random_unit_vectors(cfg.n, cfg.dimension, cfg.seed);
    let queries = bench_queries(cfg.n, cfg.queries);

    let (exact, exact_build) = RunRecord::time(|| ExactIndex::new(&vectors));
    let exact = exact?;
    let (hnsw, hnsw_build) = RunRecord::time(|| HnswIndex::build(&vectors, &cfg.hnsw));
    let hnsw = hnsw?;
    drop(vectors);

    let run = |index: &dyn NeighborIndex| -> Result<(Vec<Vec<u64>>, Duration), SearchError> {
        let start = Instant::now();
        let lists = queries
            .iter()
            .map(|q| index.search_id(*q, &params).map(|l| l.into_iter().map(|c| c.hit_id).collect()))
            .collect::<Result<Vec<Vec<u64>>, _>>()?;
        Ok((lists, start.elapsed()))
    };
    let (truth, exact_search) = run(&exact)?;
    let (approx, hnsw_search) = run(&hnsw)?;
    let recall = recall_at_k(&truth, &approx);
    let ms = |d: Duration| d.as_secs_f64() * 1e3;
    Ok(BenchReport {
        config: *cfg,
        queries: queries.len(),
        exact: BenchRow { build_ms: ms(exact_build), search_ms: ms(exact_search), recall: 1.0 },
        hnsw: BenchRow { build_ms: ms(hnsw_build), search_ms: ms(hnsw_search), recall },
    })
}

/// Mean fraction of each exact list recovered by the approximate list.
pub fn recall_at_k(exact: &[Vec<u64>], approx: &[Vec<u64>]) -> f64 {
    if exact.is_empty() {
        return 1.0;
    }
    let total: f64 = exact
        .iter()
        .zip(approx)
        .map(
            |(e, a)| {
                if e.is_empty() {
                    1.0
                } else {
                    e.iter().filter(|id| a.contains(id)).count() as f64 / e.len() as f64
                }
            },
        )
        .sum();
    total / exact.len() as f64
}
