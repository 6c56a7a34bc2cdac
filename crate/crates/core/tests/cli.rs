//! The `sscd` binary end to end.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sscd::metrics::CloneType;
use sscd::synth::{generate_corpus, CorpusSpec, GeneratedCorpus};

fn sscd(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sscd"));
    cmd.args(args).env_remove("RUST_LOG");
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("SSCD_")) {
        cmd.env_remove(k);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn corpus(dir: &Path) -> (GeneratedCorpus, PathBuf) {
    let corpus = generate_corpus(&CorpusSpec { functions: 40, t1: 4, t2: 4, st3: 3, files: 5, seed: 9 });
    corpus.write_sources(&dir.join("src")).unwrap();
    corpus.write_truth(&dir.join("truth.csv")).unwrap();
    (corpus, dir.join("src"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn report_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn pair_keys(rows: &[Vec<String>]) -> BTreeSet<String> {
    rows.iter().map(|r| r[..6].join(",")).collect()
}

#[test]
fn detect_reports_planted_pairs_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, src) = corpus(dir.path());
    let out_dir = dir.path().join("out");
    let out = sscd(&[
        "detect",
        "--source",
        p(&src),
        "--output-dir",
        p(&out_dir),
        "--search-type",
        "exact",
        "--top-n",
        "10",
        "--similarity",
        "0",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["report.csv", "report.jsonl", "timing.json"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    let rows = report_rows(&out_dir.join("report.csv"));
    for t in corpus.truth.iter().filter(|t| matches!(t.clone_type, CloneType::T1 | CloneType::T2)) {
        let hit = rows.iter().find(|r| {
            let a = (r[0].as_str(), r[1].parse::<usize>().unwrap());
            let b = (r[3].as_str(), r[4].parse::<usize>().unwrap());
            let ta = (t.a.file.as_str(), t.a.start_line);
            let tb = (t.b.file.as_str(), t.b.start_line);
            (a == ta && b == tb) || (a == tb && b == ta)
        });
        let sim: f64 = hit.unwrap_or_else(|| panic!("missing {t:?}"))[6].parse().unwrap();
        assert_eq!(sim, 1.0, "{t:?}");
    }
    let timing: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("timing.json")).unwrap()).unwrap();
    for key in ["parse_ms", "inference_ms", "index_build_ms", "search_ms", "total_ms"] {
        assert!(timing[key].as_f64().unwrap() > 0.0, "{key}");
    }

    // tighter sigma and epsilon only remove pairs
    let narrow = dir.path().join("narrow");
    let out =
        sscd(&["detect", "--source", p(&src), "--output-dir", p(&narrow), "--top-n", "1", "--similarity", "0.95"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let narrow_rows = report_rows(&narrow.join("report.csv"));
    assert!(!narrow_rows.is_empty());
    assert!(pair_keys(&narrow_rows).is_subset(&pair_keys(&rows)));
}

#[test]
fn detect_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (_, src) = corpus(dir.path());
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = sscd(&[
            "detect",
            "--source",
            p(&src),
            "--output-dir",
            p(&out_dir),
            "--search-type",
            "hnsw",
            "--hnsw-m",
            "8",
            "--hnsw-efc",
            "40",
            "--hnsw-efs",
            "40",
            "--similarity",
            "0.5",
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        reports.push((fs::read(out_dir.join("report.csv")).unwrap(), fs::read(out_dir.join("report.jsonl")).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let (_, src) = corpus(dir.path());
    let cfg = dir.path().join("sscd.toml");
    fs::write(&cfg, format!("source = \"{}\"\ntop_n = 1\nsimilarity = 0.0\n", p(&src))).unwrap();
    let from_file = dir.path().join("file");
    let out = sscd(&["detect", "--config", p(&cfg), "--output-dir", p(&from_file)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let flagged = dir.path().join("flag");
    let out = sscd(&["detect", "--config", p(&cfg), "--output-dir", p(&flagged), "--top-n", "5"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let a = report_rows(&from_file.join("report.csv")).len();
    let b = report_rows(&flagged.join("report.csv")).len();
    assert!(b > a, "{a} {b}");
}

#[test]
fn empty_source_gives_header_only_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("src")).unwrap();
    let out_dir = dir.path().join("out");
    let out = sscd(&["detect", "--source", p(&dir.path().join("src")), "--output-dir", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("no fragments"), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(out_dir.join("report.csv")).unwrap().lines().count(), 1);
}

#[test]
fn user_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let missing = sscd(&["detect", "--source", "/definitely/not/here", "--output-dir", p(&out_dir)]);
    assert_eq!(code(&missing), 1, "{}", stderr(&missing));
    assert!(!out_dir.join("report.csv").exists());
    assert_eq!(code(&sscd(&["detect", "--output-dir", p(&out_dir)])), 1);
    assert_eq!(code(&sscd(&["detect", "--source", ".", "--similarity", "2"])), 1);
    assert_eq!(code(&sscd(&["detect", "--source", ".", "--set", "no_such_key=1"])), 1);
    assert_eq!(code(&sscd(&["frobnicate"])), 1);
    assert_eq!(code(&sscd(&["bench", "--n", "10"])), 1);
    assert_eq!(code(&sscd(&["--help"])), 0);
}

#[test]
fn eval_scores_reports() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.csv");
    fs::write(&truth, "file_a,start_a,end_a,file_b,start_b,end_b,type\na.c,1,10,b.c,1,10,T1\nc.c,5,9,d.c,5,9,ST3\n")
        .unwrap();
    let write_report = |name: &str, rows: &str| {
        let path = dir.path().join(name);
        fs::write(&path, format!("file_a,start_a,end_a,file_b,start_b,end_b,similarity\n{rows}")).unwrap();
        path
    };
    let eval = |report: &Path, extra: &[&str]| -> serde_json::Value {
        let mut args = vec!["eval", "--report", p(report), "--truth", p(&truth)];
        args.extend_from_slice(extra);
        let out = sscd(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        serde_json::from_slice(&out.stdout).unwrap()
    };

    let exact = write_report("exact.csv", "a.c,1,10,b.c,1,10,1.0\nd.c,5,9,c.c,5,9,0.97\n");
    let v = eval(&exact, &[]);
    assert_eq!(v["recall_overall"], 100.0);
    assert_eq!(v["truth_pairs"], 2);

    let empty = write_report("empty.csv", "");
    let v = eval(&empty, &[]);
    assert_eq!(v["recall_overall"], 0.0);
    assert_eq!(v["recall_by_type"]["T1"], 0.0);
    assert_eq!(v["recall_by_type"]["ST3"], 0.0);

    let near = write_report("near.csv", "a.c,1,7,b.c,1,10,0.99\n");
    assert_eq!(eval(&near, &["--overlap", "0.70"])["recall_by_type"]["T1"], 100.0);
    assert_eq!(eval(&near, &["--overlap", "0.71"])["recall_by_type"]["T1"], 0.0);

    let v = eval(&exact, &["--review", "285,32,21,62"]);
    assert!((v["kappa"].as_f64().unwrap() - 0.6159).abs() < 1e-4);
    assert!((v["precision_strict"].as_f64().unwrap() - 82.13).abs() < 0.01);

    let bad = write_report("bad.csv", "a.c,1,10,b.c,1,10,1.0\na.c,x,10,b.c,1,10,1.0\n");
    let out = sscd(&["eval", "--report", p(&bad), "--truth", p(&truth)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains(":3"), "{}", stderr(&out));
}

#[test]
fn embed_cache_then_detect_skips_inference() {
    let dir = tempfile::tempdir().unwrap();
    let (_, src) = corpus(dir.path());
    let cache = dir.path().join("cache");
    let out = sscd(&["embed-cache", "--source", p(&src), "--cache-dir", p(&cache)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out_dir = dir.path().join("out");
    let out = sscd(&["detect", "--source", p(&src), "--cache-dir", p(&cache), "--output-dir", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let timing: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("timing.json")).unwrap()).unwrap();
    assert_eq!(timing["inference_ms"], 0.0);
    assert!(timing["parse_ms"].as_f64().unwrap() > 0.0);
}

#[test]
fn bench_prints_a_deterministic_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut recalls = Vec::new();
    for run in ["a", "b"] {
        let json = dir.path().join(format!("{run}.json"));
        let out = sscd(&[
            "bench",
            "--n",
            "400",
            "--dimension",
            "16",
            "--queries",
            "100",
            "--hnsw-m",
            "8",
            "--hnsw-efc",
            "64",
            "--hnsw-efs",
            "64",
            "--json",
            p(&json),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("exact") && text.contains("hnsw") && text.contains("recall@k"), "{text}");
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
        recalls.push(v["hnsw"]["recall"].as_f64().unwrap());
    }
    assert_eq!(recalls[0], recalls[1]);
    assert!(recalls[0] > 0.9);
}

#[test]
fn detect_can_save_the_index() {
    let dir = tempfile::tempdir().unwrap();
    let (_, src) = corpus(dir.path());
    let index = dir.path().join("idx.hnsw");
    let out = sscd(&[
        "detect",
        "--source",
        p(&src),
        "--output-dir",
        p(&dir.path().join("out")),
        "--search-type",
        "hnsw",
        "--save-index",
        p(&index),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let loaded = sscd::search::load_hnsw(&index).unwrap();
    assert!(loaded.audit().is_ok());
}
