//! End-to-end detection over a generated C corpus with planted clones.

use sscd::config::RunConfig;
use sscd::pipeline::cmd_detect;
use sscd::search::SearchType;
use sscd::synth::{generate_corpus, CorpusSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let corpus = generate_corpus(&CorpusSpec { functions: 80, t1: 5, t2: 5, st3: 5, files: 6, seed: 7 });
    corpus.write_sources(&dir.path().join("src"))?;

    let mut cfg =
        RunConfig { source: Some(dir.path().join("src")), output_dir: dir.path().join("out"), ..Default::default() };
    cfg.search.search_type = SearchType::Hnsw;
    cfg.search.similarity_floor = 0.9;

    let out = cmd_detect(&cfg)?;
    println!("{} fragments, {} pairs", out.fragments, out.rows.len());
    for r in out.rows.iter().take(10) {
        println!("{:.4}  {}:{}-{}  {}:{}-{}", r.similarity, r.file_a, r.start_a, r.end_a, r.file_b, r.start_b, r.end_b);
    }
    println!("{}", serde_json::to_string_pretty(&out.timing)?);
    Ok(())
}
