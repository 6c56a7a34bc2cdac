//! Lists the functions found under a source tree.
//!
//!     cargo run --example extract_functions -- path/to/src [c|cpp|java]

use std::path::PathBuf;

use sscd::extractor::{extract_fragments, ExtractionConfig, Language};

const DEMO: &str = r#"#include <stdio.h>

/* sums a range */
int sum(int *xs, int n) {
    int total = 0;
    for (int i = 0; i < n; i++) {
        total += xs[i];
    }
    return total;
}

static void greet(const char *name) { printf("hi %s\n", name); }
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut cfg = ExtractionConfig { min_loc: 1, ..Default::default() };
    let _demo;
    let root = match args.next() {
        Some(p) => PathBuf::from(p),
        None => {
            _demo = tempfile::tempdir()?;
            std::fs::write(_demo.path().join("demo.c"), DEMO)?;
            _demo.path().to_path_buf()
        }
    };
    if let Some(lang) = args.next() {
        cfg.language = lang.parse::<Language>()?;
    }

    let fragments = extract_fragments(&root, &cfg)?;
    for f in &fragments {
        println!(
            "{:>4}  {}:{}-{}  {}  ({} loc, {} tokens)",
            f.id,
            f.file,
            f.start_line,
            f.end_line,
            f.name,
            f.loc,
            f.tokens.len()
        );
    }
    if let Some(f) = fragments.first() {
        println!("\nnormalized tokens of `{}`:\n{}", f.name, f.tokens.join(" "));
    }
    Ok(())
}
