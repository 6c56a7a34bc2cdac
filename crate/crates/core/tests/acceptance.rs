//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sscd::config::RunConfig;
use sscd::embedder::EmbeddingVector;
use sscd::extractor::TokenizerMode;
use sscd::metrics::{
    cohen_kappa, f_score, match_overlap, observed_agreement, precision_from_sample, recall_by_type, CloneType,
    FragmentSpan, GroundTruthPair, ReviewTable,
};
use sscd::pipeline::{cmd_detect, recall_at_k};
use sscd::reporter::collect_pairs;
use sscd::search::{search_all, ExactIndex, HnswIndex, HnswParams, NeighborIndex, SearchParams, SearchType};
use sscd::synth::{generate_corpus, random_unit_vectors, CorpusSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn f_score_values() -> Outcome {
    for (p, r, want) in [(14.81, 86.08, 25.27), (84.21, 60.76, 70.59), (88.75, 79.78, 84.03)] {
        let got = f_score(p, r);
        // harmonic mean written out directly
        let oracle = 1.0 / ((1.0 / p + 1.0 / r) / 2.0);
        ensure(close(got, oracle, 1e-9), || format!("f_score({p}, {r}) = {got}, oracle {oracle}"))?;
        ensure(close(got, want, 0.01), || format!("f_score({p}, {r}) = {got:.4}, expected {want}"))?;
    }
    Ok("25.27 / 70.59 / 84.03 within 0.01".into())
}

fn kappa_and_precision() -> Outcome {
    let table = ReviewTable::new(285, 32, 21, 62);
    let kappa = cohen_kappa(&table).map_err(|e| e.to_string())?;
    let agreement = observed_agreement(&table).map_err(|e| e.to_string())? * 100.0;
    let p = precision_from_sample(&table).map_err(|e| e.to_string())?;

    // independent arithmetic on the raw counts
    let n = 400.0;
    let po = (285.0 + 62.0) / n;
    let pe = (317.0 / n) * (306.0 / n) + (83.0 / n) * (94.0 / n);
    ensure(close(kappa, (po - pe) / (1.0 - pe), 1e-12), || format!("kappa {kappa} disagrees with oracle"))?;

    ensure(close(kappa, 0.62, 0.005), || format!("kappa {kappa:.4}, expected 0.62"))?;
    ensure(close(agreement, 86.75, 0.01), || format!("agreement {agreement:.4}%, expected 86.75%"))?;
    for (name, got, want) in
        [("strict", p.strict, 82.13), ("optimistic", p.optimistic, 84.5), ("pessimistic", p.pessimistic, 71.25)]
    {
        ensure(close(got, want, 0.01), || format!("{name} precision {got:.4}, expected {want}"))?;
    }
    Ok(format!(
        "kappa {kappa:.4}, agreement {agreement:.2}%, precision {:.2}/{:.2}/{:.2}%",
        p.strict, p.optimistic, p.pessimistic
    ))
}

/// Full sort over naively summed cosines.
fn oracle_search(vectors: &[EmbeddingVector], query: usize, k: usize, floor: f64) -> Vec<u64> {
    let norm = |v: &[f32]| v.iter().map(|x| f64::from(*x) * f64::from(*x)).sum::<f64>().sqrt();
    let q = &vectors[query].values;
    let mut all: Vec<(u64, f64)> = vectors
        .iter()
        .map(|v| {
            let dot: f64 = v.values.iter().zip(q).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum();
            (v.fragment_id, dot / (norm(&v.values) * norm(q)))
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.into_iter()
        .filter(|(id, s)| *id != vectors[query].fragment_id && *s >= floor)
        .take(k)
        .map(|(id, _)| id)
        .collect()
}

fn exact_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xe4ac7);
    let mut queries = 0usize;
    for instance in 0..200 {
        let d = if instance % 2 == 0 { 8 } else { 768 };
        let n = rng.random_range(2..=1000usize);
        let distinct = rng.random_range(1..=n);
        let mut base: Vec<Vec<f32>> =
            (0..distinct).map(|_| (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect()).collect();
        // planted duplicates produce exact ties
        while base.len() < n {
            let src = rng.random_range(0..distinct);
            base.push(base[src].clone());
        }
        let mut ids: Vec<u64> = (0..n as u64).map(|i| i * 7919 + rng.random_range(0..7919)).collect();
        ids.shuffle(&mut rng);
        let vectors: Vec<EmbeddingVector> =
            ids.iter().zip(base).map(|(id, values)| EmbeddingVector { fragment_id: *id, values }).collect();
        let index = ExactIndex::new(&vectors).map_err(|e| e.to_string())?;
        let k = rng.random_range(1..=20usize);
        let floor = if rng.random_bool(0.5) { -1.0 } else { rng.random_range(-0.2..0.9) };
        let params = SearchParams { search_type: SearchType::Exact, k, ef_search: k, similarity_floor: floor };
        for q in (0..n).step_by((n / 10).max(1)) {
            let got: Vec<u64> = index
                .search_id(vectors[q].fragment_id, &params)
                .map_err(|e| e.to_string())?
                .iter()
                .map(|c| c.hit_id)
                .collect();
            let want = oracle_search(&vectors, q, k, floor);
            ensure(got == want, || format!("instance {instance} (N={n}, D={d}) query {q}: {got:?} != {want:?}"))?;
            queries += 1;
        }
    }
    Ok(format!("200 instances, {queries} queries identical"))
}

fn hnsw_quality() -> Outcome {
    let vectors = random_unit_vectors(10_000, 768, 11);
    let start = Instant::now();
    let hnsw =
        HnswIndex::build(&vectors, &HnswParams { m: 32, ef_construction: 200, seed: 7 }).map_err(|e| e.to_string())?;
    let build = start.elapsed();
    let audit = hnsw.audit();
    ensure(audit.is_ok(), || format!("graph audit failed: {audit:?}"))?;
    let exact = ExactIndex::new(&vectors).map_err(|e| e.to_string())?;
    let params = SearchParams { search_type: SearchType::Hnsw, k: 10, ef_search: 120, similarity_floor: -1.0 };
    let ids = |lists: Vec<Vec<sscd::search::CloneCandidate>>| -> Vec<Vec<u64>> {
        lists.into_iter().map(|l| l.into_iter().map(|c| c.hit_id).collect()).collect()
    };
    let approx = ids(search_all(&hnsw, &params).map_err(|e| e.to_string())?);
    let truth =
        ids(search_all(&exact, &SearchParams { search_type: SearchType::Exact, ..params })
            .map_err(|e| e.to_string())?);
    let recall = recall_at_k(&truth, &approx);
    ensure(recall >= 0.95, || format!("recall@10 {recall:.4} < 0.95"))?;
    Ok(format!("recall@10 {recall:.4} over 10000 queries, audit ok, build {:.1}s", build.as_secs_f64()))
}

fn hnsw_speedup() -> Outcome {
    let n = 100_000;
    let vectors = random_unit_vectors(n, 768, 12);
    let start = Instant::now();
    let hnsw = HnswIndex::build(&vectors, &HnswParams::default()).map_err(|e| e.to_string())?;
    let build = start.elapsed();
    let exact = ExactIndex::new(&vectors).map_err(|e| e.to_string())?;
    drop(vectors);
    let queries: Vec<u64> = (0..n as u64).step_by(n / 200).collect();
    let run = |index: &dyn NeighborIndex, params: &SearchParams| -> Result<(f64, Vec<Vec<u64>>), String> {
        let start = Instant::now();
        let mut lists = Vec::with_capacity(queries.len());
        for q in &queries {
            let hits = index.search_id(*q, params).map_err(|e| e.to_string())?;
            lists.push(hits.into_iter().map(|c| c.hit_id).collect());
        }
        Ok((start.elapsed().as_secs_f64(), lists))
    };
    let params = SearchParams { search_type: SearchType::Hnsw, k: 10, ef_search: 120, similarity_floor: -1.0 };
    let (t_hnsw, approx) = run(&hnsw, &params)?;
    let (t_exact, truth) = run(&exact, &SearchParams { search_type: SearchType::Exact, ..params })?;
    let detail = format!(
        "{} queries single-threaded: hnsw {:.2}s, exact {:.2}s ({:.1}x), recall@10 {:.3}, build {:.0}s",
        queries.len(),
        t_hnsw,
        t_exact,
        t_exact / t_hnsw,
        recall_at_k(&truth, &approx),
        build.as_secs_f64()
    );
    ensure(t_hnsw < t_exact, || detail.clone())?;
    Ok(detail)
}

fn corpus_config(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig {
        source: Some(dir.join("src")),
        output_dir: dir.join("out"),
        search: SearchParams { search_type: SearchType::Exact, k: 10, ef_search: 120, similarity_floor: 0.95 },
        ..Default::default()
    };
    cfg.extraction.tokenizer_mode = TokenizerMode::Normalized;
    cfg
}

fn end_to_end_corpus() -> Outcome {
    let corpus = generate_corpus(&CorpusSpec::default());
    ensure(corpus.function_count >= 200, || format!("only {} functions", corpus.function_count))?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    corpus.write_sources(&dir.path().join("src")).map_err(|e| e.to_string())?;
    let out = cmd_detect(&corpus_config(dir.path())).map_err(|e| e.to_string())?;
    let detected: Vec<_> = out.rows.iter().map(|r| r.detected()).collect();
    let by_type = recall_by_type(&detected, &corpus.truth, 0.7).map_err(|e| e.to_string())?;
    let pct = |t: CloneType| by_type.get(&t).copied().unwrap_or(0.0) * 100.0;
    let (t1, t2, st3) = (pct(CloneType::T1), pct(CloneType::T2), pct(CloneType::ST3));

    for t in corpus.truth.iter().filter(|t| matches!(t.clone_type, CloneType::T1 | CloneType::T2)) {
        let hit = out.rows.iter().find(|r| {
            let spans =
                (FragmentSpan::new(&r.file_a, r.start_a, r.end_a), FragmentSpan::new(&r.file_b, r.start_b, r.end_b));
            (spans.0 == t.a && spans.1 == t.b) || (spans.0 == t.b && spans.1 == t.a)
        });
        let sim = hit.map(|r| r.similarity);
        ensure(sim.is_some_and(|s| close(s, 1.0, 1e-6)), || {
            format!("{} pair {:?} reported at {sim:?}", t.clone_type, t.a)
        })?;
    }
    let detail = format!(
        "{} functions, T1 {t1:.0}%, T2 {t2:.0}%, ST3 {st3:.0}%, {} pairs reported",
        corpus.function_count,
        out.rows.len()
    );
    ensure(t1 == 100.0 && t2 == 100.0 && st3 >= 60.0, || detail.clone())?;
    Ok(detail)
}

fn small_vectors() -> impl Strategy<Value = Vec<EmbeddingVector>> {
    (2usize..40, 2usize..12).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop::collection::vec(-4i8..=4, d), n).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .filter(|(_, r)| r.iter().any(|x| *x != 0))
                .map(|(i, r)| EmbeddingVector {
                    fragment_id: i as u64 * 3 + 1,
                    values: r.into_iter().map(f32::from).collect(),
                })
                .collect()
        })
    })
}

fn pair_set(vectors: &[EmbeddingVector], k: usize, floor: f64) -> Result<Vec<(u64, u64, f64)>, TestCaseError> {
    let index = ExactIndex::new(vectors).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let params = SearchParams { search_type: SearchType::Exact, k, ef_search: k, similarity_floor: floor };
    let lists = search_all(&index, &params).map_err(|e| TestCaseError::fail(e.to_string()))?;
    Ok(collect_pairs(&lists, k, floor).into_iter().map(|p| (p.a_id, p.b_id, p.similarity)).collect())
}

fn keys(pairs: &[(u64, u64, f64)]) -> BTreeSet<(u64, u64)> {
    pairs.iter().map(|(a, b, _)| (*a, *b)).collect()
}

fn monotonicity_and_dedup() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    let strategy = (small_vectors(), 1usize..8, 1usize..8, -1.0f64..1.0, -1.0f64..1.0);
    runner
        .run(&strategy, |(vectors, k1, k2, s1, s2)| {
            let (k_lo, k_hi) = (k1.min(k2), k1.max(k2));
            let (s_lo, s_hi) = (s1.min(s2), s1.max(s2));
            // raising sigma never adds pairs
            prop_assert!(keys(&pair_set(&vectors, k_lo, s_hi)?).is_subset(&keys(&pair_set(&vectors, k_lo, s_lo)?)));
            // raising epsilon never removes pairs
            prop_assert!(keys(&pair_set(&vectors, k_lo, s_lo)?).is_subset(&keys(&pair_set(&vectors, k_hi, s_lo)?)));
            Ok(())
        })
        .map_err(|e| format!("monotonicity: {e}"))?;

    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    runner
        .run(&(small_vectors(), 1usize..8, -1.0f64..1.0), |(vectors, k, floor)| {
            let pairs = pair_set(&vectors, k, floor)?;
            let unique = keys(&pairs);
            prop_assert_eq!(unique.len(), pairs.len(), "duplicate pair");
            let cos: HashMap<u64, &[f32]> = vectors.iter().map(|v| (v.fragment_id, v.values.as_slice())).collect();
            for (a, b, sim) in &pairs {
                prop_assert!(a < b, "pair not ordered or self pair");
                prop_assert!(*sim >= floor);
                let naive = sscd::search::cosine(cos[a], cos[b]).unwrap();
                prop_assert!((naive - sim).abs() < 1e-6);
            }
            Ok(())
        })
        .map_err(|e| format!("dedup: {e}"))?;
    Ok("1000 cases each for sigma/epsilon monotonicity and dedup".into())
}

fn overlap_flip() -> Outcome {
    let truth = GroundTruthPair {
        a: FragmentSpan::new("a.c", 1, 10),
        b: FragmentSpan::new("b.c", 1, 10),
        clone_type: CloneType::T1,
    };
    let (da, db) = (FragmentSpan::new("a.c", 1, 7), FragmentSpan::new("b.c", 1, 10));
    let at_70 = match_overlap(&da, &db, &truth, 0.70);
    let at_71 = match_overlap(&da, &db, &truth, 0.71);
    ensure(at_70 && !at_71, || format!("0.70 -> {at_70}, 0.71 -> {at_71}"))?;
    Ok("matched at 0.70, unmatched at 0.71".into())
}

fn timing_decomposition() -> Outcome {
    let corpus = generate_corpus(&CorpusSpec { functions: 60, t1: 5, t2: 5, st3: 5, files: 6, seed: 4 });
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    corpus.write_sources(&dir.path().join("src")).map_err(|e| e.to_string())?;
    let mut details = Vec::new();
    for search_type in [SearchType::Exact, SearchType::Hnsw] {
        let mut cfg = corpus_config(dir.path());
        cfg.search.search_type = search_type;
        cfg.cache_dir = Some(dir.path().join(format!("cache-{search_type}")));
        for pass in ["fresh", "cached"] {
            let out = cmd_detect(&cfg).map_err(|e| e.to_string())?;
            let t = out.timing;
            let written = out.timing_path.as_ref().is_some_and(|p| p.exists());
            ensure(written, || format!("{search_type} {pass}: timing.json missing"))?;
            ensure(t.parse_ms > 0.0 && t.index_build_ms > 0.0 && t.search_ms > 0.0 && t.total_ms > 0.0, || {
                format!("{search_type} {pass}: zero duration in {t:?}")
            })?;
            match pass {
                "fresh" => ensure(!out.cached && t.inference_ms > 0.0, || format!("{search_type} fresh: {t:?}"))?,
                _ => ensure(out.cached && t.inference_ms == 0.0, || format!("{search_type} cached: {t:?}"))?,
            }
        }
        details.push(format!("{search_type} ok"));
    }
    Ok(format!("{}; cached inference = 0", details.join(", ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("metric reproduction: F-score", f_score_values),
        ("metric reproduction: kappa/precision", kappa_and_precision),
        ("exact-search oracle equivalence", exact_oracle),
        ("HNSW quality", hnsw_quality),
        ("HNSW speedup direction", hnsw_speedup),
        ("end-to-end seeded corpus", end_to_end_corpus),
        ("sigma/epsilon monotonicity and dedup", monotonicity_and_dedup),
        ("overlap matching 0.70/0.71", overlap_flip),
        ("timing decomposition", timing_decomposition),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
