//! Detects clones in a generated corpus and scores the report against the
//! planted pairs.

use sscd::config::RunConfig;
use sscd::metrics::ReviewTable;
use sscd::pipeline::{cmd_detect, cmd_eval, EvalOptions};
use sscd::synth::{generate_corpus, CorpusSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let corpus = generate_corpus(&CorpusSpec::default());
    corpus.write_sources(&dir.path().join("src"))?;
    corpus.write_truth(&dir.path().join("truth.csv"))?;

    let cfg =
        RunConfig { source: Some(dir.path().join("src")), output_dir: dir.path().join("out"), ..Default::default() };
    let out = cmd_detect(&cfg)?;

    let opts = EvalOptions {
        overlap_threshold: 0.7,
        // hypothetical manual review of a sample of the report
        review: Some(ReviewTable::new(40, 3, 2, 5)),
        timing: out.timing_path.clone(),
    };
    let eval = cmd_eval(&out.report_csv, &dir.path().join("truth.csv"), &opts)?;
    print!("{eval}");
    Ok(())
}
