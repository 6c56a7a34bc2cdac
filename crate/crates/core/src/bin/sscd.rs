use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sscd::config::RunConfig;
use sscd::metrics::ReviewTable;
use sscd::pipeline::{
    cmd_bench, cmd_detect_with_index, cmd_embed_cache, cmd_eval, BenchConfig, EvalOptions, PipelineError,
};
use sscd::search::HnswParams;

#[derive(Parser)]
#[command(name = "sscd", version, about = "Embedding-based code clone detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract, embed, search and write a clone report.
    Detect {
        #[command(flatten)]
        run: RunArgs,
        /// Also save the HNSW index to this file.
        #[arg(long)]
        save_index: Option<PathBuf>,
    },
    /// Score a report against a ground-truth file.
    Eval(EvalArgs),
    /// Compare exact and HNSW search on seeded random vectors.
    Bench(BenchArgs),
    /// Extract and embed into a cache directory for later detect runs.
    EmbedCache {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat TOML file of configuration keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Minimum lines of code per fragment.
    #[arg(long)]
    min_loc: Option<usize>,
    /// Embedding provider: hash or remote.
    #[arg(long)]
    provider: Option<String>,
    /// Model name sent to the remote embedding service.
    #[arg(long)]
    model: Option<String>,
    /// Maximum tokens per fragment.
    #[arg(long)]
    code_length: Option<usize>,
    #[arg(long)]
    dimension: Option<usize>,
    #[arg(long)]
    service_endpoint: Option<String>,
    /// exact or hnsw.
    #[arg(long)]
    search_type: Option<String>,
    /// Candidates kept per query.
    #[arg(long)]
    top_n: Option<usize>,
    /// Cosine floor.
    #[arg(long, allow_hyphen_values = true)]
    similarity: Option<f64>,
    #[arg(long)]
    hnsw_m: Option<usize>,
    #[arg(long)]
    hnsw_efc: Option<usize>,
    #[arg(long)]
    hnsw_efs: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Any configuration key, as KEY=VALUE. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>, PipelineError> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_owned(), v));
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        put("source", path(&self.source));
        put("manifest", path(&self.manifest));
        put("output_dir", path(&self.output_dir));
        put("cache_dir", path(&self.cache_dir));
        put("min_loc", self.min_loc.map(|v| v.to_string()));
        put("provider", self.provider.clone());
        put("model", self.model.clone());
        put("code_length", self.code_length.map(|v| v.to_string()));
        put("dimension", self.dimension.map(|v| v.to_string()));
        put("service_endpoint", self.service_endpoint.clone());
        put("search_type", self.search_type.clone());
        put("top_n", self.top_n.map(|v| v.to_string()));
        put("similarity", self.similarity.map(|v| v.to_string()));
        put("hnsw_m", self.hnsw_m.map(|v| v.to_string()));
        put("hnsw_efc", self.hnsw_efc.map(|v| v.to_string()));
        put("hnsw_efs", self.hnsw_efs.map(|v| v.to_string()));
        put("threads", self.threads.map(|v| v.to_string()));
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| PipelineError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            out.push((k.to_owned(), v.to_owned()));
        }
        Ok(out)
    }

    fn load(&self) -> Result<RunConfig, PipelineError> {
        let cfg = RunConfig::load(self.config.as_deref(), &self.overrides()?)?;
        set_threads(cfg.threads);
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Report written by detect (.csv or .jsonl).
    #[arg(long)]
    report: PathBuf,
    /// Ground-truth CSV.
    #[arg(long)]
    truth: PathBuf,
    /// Share of each truth fragment a detection must cover.
    #[arg(long, default_value_t = 0.7)]
    overlap: f64,
    /// Review counts: both_clone,first_only,second_only,both_non.
    #[arg(long)]
    review: Option<String>,
    /// timing.json to attach.
    #[arg(long)]
    timing: Option<PathBuf>,
    /// Write the evaluation as JSON here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 768)]
    dimension: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Queries timed on each back end.
    #[arg(long, default_value_t = 1000)]
    queries: usize,
    #[arg(long, default_value_t = 32)]
    hnsw_m: usize,
    #[arg(long, default_value_t = 200)]
    hnsw_efc: usize,
    #[arg(long, default_value_t = 120)]
    hnsw_efs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Also write the results as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn set_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("cannot resize the worker pool: {e}");
        }
    }
}

fn write_json(path: &PathBuf, value: &impl serde::Serialize) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|source| PipelineError::Io { path: path.display().to_string(), source })
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Detect { run, save_index } => {
            let cfg = run.load()?;
            let out = cmd_detect_with_index(&cfg, save_index.as_deref())?;
            println!("{} fragments, {} pairs -> {}", out.fragments, out.rows.len(), out.report_csv.display());
            if let Some(t) = out.timing_path {
                println!("timing -> {}", t.display());
            }
        }
        Command::EmbedCache { run } => {
            let cfg = run.load()?;
            let out = cmd_embed_cache(&cfg)?;
            let dir = cfg.cache_dir.as_ref().map(|d| d.display().to_string()).unwrap_or_default();
            println!("{} fragments embedded -> {dir}", out.vectors.len());
        }
        Command::Eval(args) => {
            let review = args
                .review
                .as_deref()
                .map(|s| s.parse::<ReviewTable>().map_err(|e| PipelineError::Usage(format!("--review: {e}"))))
                .transpose()?;
            let opts = EvalOptions { overlap_threshold: args.overlap, review, timing: args.timing };
            let eval = cmd_eval(&args.report, &args.truth, &opts)?;
            match &args.json {
                Some(path) => {
                    write_json(path, &eval)?;
                    print!("{eval}");
                }
                None => println!("{}", serde_json::to_string_pretty(&eval).expect("serializable")),
            }
        }
        Command::Bench(args) => {
            set_threads(args.threads);
            let cfg = BenchConfig {
                n: args.n,
                dimension: args.dimension,
                k: args.k,
                queries: args.queries,
                ef_search: args.hnsw_efs,
                hnsw: HnswParams { m: args.hnsw_m, ef_construction: args.hnsw_efc, seed: args.seed },
                seed: args.seed,
            };
            let report = cmd_bench(&cfg)?;
            print!("{report}");
            if let Some(path) = &args.json {
                write_json(path, &report)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sscd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
