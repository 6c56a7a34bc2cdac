//! Method-level fragment extraction.
//!
//! A source tree (or a pre-extracted JSON-lines manifest) becomes a sorted,
//! densely numbered list of [`CodeFragment`]s, each filtered by a minimum
//! line count and tokenized for the embedder.

mod lexer;
mod manifest;
mod methods;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

pub use lexer::{count_loc, lex, tokenize, Lexeme, LexemeKind, ID_TOKEN, NUM_TOKEN, STR_TOKEN};
pub use manifest::{load_fragment_dump, load_manifest, write_fragment_dump, ManifestRecord};
pub use methods::{find_methods, MethodSpan};

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("unsupported language `{0}` (expected c, cpp, java or manifest)")]
    UnsupportedLanguage(String),
    #[error("unsupported tokenizer mode `{0}` (expected raw or normalized)")]
    UnsupportedTokenizerMode(String),
    #[error("source root {path} is not readable: {source}")]
    Root {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Manifest { path: PathBuf, line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    C,
    Cpp,
    Java,
    /// Pre-extracted fragments in a JSON-lines manifest.
    Manifest,
}

impl Language {
    /// File extensions scanned for this language.
    pub fn extensions(self) -> &'static [&'static str] {
        match self {
            Language::C => &["c", "h"],
            Language::Cpp => &["cpp", "cc", "cxx", "c++", "hpp", "hh", "hxx", "h"],
            Language::Java => &["java"],
            Language::Manifest => &["jsonl", "json"],
        }
    }
}

impl FromStr for Language {
    type Err = ExtractError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "c" => Ok(Language::C),
            "cpp" | "c++" | "cxx" => Ok(Language::Cpp),
            "java" => Ok(Language::Java),
            "manifest" => Ok(Language::Manifest),
            _ => Err(ExtractError::UnsupportedLanguage(s.to_owned())),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Language::C => "c",
            Language::Cpp => "cpp",
            Language::Java => "java",
            Language::Manifest => "manifest",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerMode {
    Raw,
    #[default]
    Normalized,
}

impl FromStr for TokenizerMode {
    type Err = ExtractError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(TokenizerMode::Raw),
            "normalized" | "normalised" => Ok(TokenizerMode::Normalized),
            _ => Err(ExtractError::UnsupportedTokenizerMode(s.to_owned())),
        }
    }
}

impl fmt::Display for TokenizerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenizerMode::Raw => "raw",
            TokenizerMode::Normalized => "normalized",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// Fragments with fewer lines of code are dropped.
    pub min_loc: usize,
    pub strip_comments: bool,
    pub language: Language,
    pub tokenizer_mode: TokenizerMode,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            min_loc: 6,
            strip_comments: true,
            language: Language::C,
            tokenizer_mode: TokenizerMode::Normalized,
        }
    }
}

/// One extracted method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeFragment {
    pub id: u64,
    /// Path relative to the extraction root, `/`-separated.
    pub file: String,
    pub start_line: usize,
    pub end_line: usize,
    pub name: String,
    pub text: String,
    pub loc: usize,
    #[serde(skip)]
    pub tokens: Vec<String>,
}

impl CodeFragment {
    /// Builds a fragment from raw method text, computing `loc` and `tokens`.
    pub fn new(
        id: u64,
        file: impl Into<String>,
        start_line: usize,
        end_line: usize,
        name: impl Into<String>,
        text: impl Into<String>,
        cfg: &ExtractionConfig,
    ) -> Self {
        let mut text = text.into();
        if cfg.strip_comments {
            text = strip_comments(&text, cfg.language);
        }
        let loc = count_loc(&text);
        let tokens = tokenize(&text, cfg.tokenizer_mode);
        CodeFragment { id, file: file.into(), start_line, end_line, name: name.into(), text, loc, tokens }
    }

    pub fn span(&self) -> crate::metrics::FragmentSpan {
        crate::metrics::FragmentSpan { file: self.file.clone(), start_line: self.start_line, end_line: self.end_line }
    }
}

/// Comment stripping for a supported language. All of them share C-style
/// comment syntax, so the language only documents intent at call sites.
pub fn strip_comments(text: &str, _language: Language) -> String {
    lexer::strip_comments(text)
}

fn relative_name(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).ok().filter(|p| !p.as_os_str().is_empty());
    let rel = rel.unwrap_or_else(|| Path::new(path.file_name().unwrap_or(path.as_os_str())));
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

fn source_files(root: &Path, language: Language) -> Vec<PathBuf> {
    let exts = language.extensions();
    let mut files: Vec<PathBuf> = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|entry| match entry {
            Ok(e) => Some(e),
            Err(err) => {
                warn!("skipping unreadable entry: {err}");
                None
            }
        })
        .filter(|e| !e.file_type().is_dir())
        .map(|e| e.into_path())
        .filter(|p| {
            p.extension().and_then(|e| e.to_str()).is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)))
        })
        .collect();
    files.sort();
    files
}

/// Methods of one file, before filtering and id assignment.
fn methods_of_file(root: &Path, path: &Path, cfg: &ExtractionConfig) -> Vec<CodeFragment> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(err) => {
            warn!("skipping {}: {err}", path.display());
            return Vec::new();
        }
    };
    let source = String::from_utf8_lossy(&bytes);
    let file = relative_name(root, path);
    let (spans, unbalanced) = find_methods(&source);
    for line in unbalanced {
        warn!("{file}:{line}: method body has no closing brace; skipped");
    }
    let lines: Vec<&str> = source.lines().collect();
    spans
        .into_iter()
        .map(|m| {
            let text = lines[m.start_line - 1..m.end_line.min(lines.len())].join("\n");
            CodeFragment::new(0, file.clone(), m.start_line, m.end_line, m.name, text, cfg)
        })
        .collect()
}

/// Sorts by `(file, start_line)`, applies the LOC floor and numbers the
/// survivors densely from zero.
fn finalize(mut fragments: Vec<CodeFragment>, cfg: &ExtractionConfig, sort: bool) -> Vec<CodeFragment> {
    if sort {
        fragments.sort_by(|a, b| (&a.file, a.start_line).cmp(&(&b.file, b.start_line)));
    }
    fragments.retain(|f| f.loc >= cfg.min_loc && !f.text.trim().is_empty());
    for (id, f) in fragments.iter_mut().enumerate() {
        f.id = id as u64;
    }
    fragments
}

/// Extracts every method under `root`.
///
/// `root` may be a directory or a single file. With [`Language::Manifest`] it
/// must name a JSON-lines manifest. Unreadable files are logged and skipped.
pub fn extract_fragments(root: &Path, cfg: &ExtractionConfig) -> Result<Vec<CodeFragment>, ExtractError> {
    let meta = fs::metadata(root).map_err(|source| ExtractError::Root { path: root.to_path_buf(), source })?;
    if cfg.language == Language::Manifest {
        return load_manifest(root, cfg);
    }
    let (base, files) = if meta.is_dir() {
        (root.to_path_buf(), source_files(root, cfg.language))
    } else {
        let base = root.parent().map(Path::to_path_buf).unwrap_or_default();
        (base, vec![root.to_path_buf()])
    };
    let fragments: Vec<CodeFragment> =
        files.par_iter().flat_map_iter(|path| methods_of_file(&base, path, cfg)).collect();
    Ok(finalize(fragments, cfg, true))
}
