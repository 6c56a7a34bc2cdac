//! Feature-hashed embeddings: renamed clones collapse onto the same vector
//! once identifiers and literals are normalized.

use sscd::embedder::{embed_batch, EmbedderConfig};
use sscd::extractor::{CodeFragment, ExtractionConfig, TokenizerMode};
use sscd::search::cosine;

const ORIGINAL: &str = "int add(int a, int b) {\n    int s = a + b;\n    return s * 2;\n}";
const RENAMED: &str = "int plus(int x, int y) {\n    int t = x + y;\n    return t * 3;\n}";
const OTHER: &str = "void log_line(const char *m) {\n    if (m) {\n        printf(\"%s\\n\", m);\n    }\n}";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let embedder = EmbedderConfig { dimension: 256, ..Default::default() };
    for mode in [TokenizerMode::Raw, TokenizerMode::Normalized] {
        let cfg = ExtractionConfig { tokenizer_mode: mode, ..Default::default() };
        let frags: Vec<CodeFragment> = [ORIGINAL, RENAMED, OTHER]
            .iter()
            .enumerate()
            .map(|(i, text)| CodeFragment::new(i as u64, "demo.c", 1, 4, "f", *text, &cfg))
            .collect();
        let v = embed_batch(&frags, &embedder)?;
        println!(
            "{mode:>10}: renamed {:.4}  unrelated {:.4}",
            cosine(&v[0].values, &v[1].values)?,
            cosine(&v[0].values, &v[2].values)?
        );
    }
    Ok(())
}
