//! Precision, agreement and F-score from a two-reviewer sample.
//!
//!     cargo run --example review_metrics -- 285,32,21,62 86.08

use sscd::metrics::{cohen_kappa, f_score, observed_agreement, precision_from_sample, ReviewTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let table: ReviewTable = args.next().as_deref().unwrap_or("285,32,21,62").parse()?;
    let recall: f64 = args.next().as_deref().unwrap_or("86.08").parse()?;

    let p = precision_from_sample(&table)?;
    println!("sample of {} ({} agreed)", table.total(), table.agreed());
    println!("precision   strict {:.2}%  optimistic {:.2}%  pessimistic {:.2}%", p.strict, p.optimistic, p.pessimistic);
    println!("agreement   {:.2}%", observed_agreement(&table)? * 100.0);
    println!("kappa       {:.4}", cohen_kappa(&table)?);
    println!("F-score     {:.2}% at recall {recall:.2}%", f_score(p.strict, recall));
    Ok(())
}
