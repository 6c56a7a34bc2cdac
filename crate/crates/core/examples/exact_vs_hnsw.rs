//! Exact scan against the HNSW graph on seeded random vectors.
//!
//!     cargo run --release --example exact_vs_hnsw -- 20000 768

use sscd::pipeline::{cmd_bench, BenchConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>());
    let n = args.next().transpose()?.unwrap_or(5_000);
    let dimension = args.next().transpose()?.unwrap_or(128);
    let report = cmd_bench(&BenchConfig { n, dimension, queries: 500, ..Default::default() })?;
    print!("{report}");
    println!("speedup {:.1}x", report.exact.search_ms / report.hnsw.search_ms);
    Ok(())
}
