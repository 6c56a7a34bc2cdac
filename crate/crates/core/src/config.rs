//! Run configuration assembled from defaults, `SSCD_*` environment
//! variables, a flat TOML file and command-line overrides, in that order of
//! increasing precedence.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::Serialize;

use crate::embedder::{EmbedderConfig, ProviderKind};
use crate::extractor::{ExtractionConfig, Language, TokenizerMode};
use crate::search::{HnswParams, SearchParams, SearchType};

pub const ENV_PREFIX: &str = "SSCD_";

/// Every key accepted in a config file, as an environment variable suffix
/// and (with `_` replaced by `-`) as a flag.
pub const KEYS: &[&str] = &[
    "min_loc",
    "strip_comments",
    "language",
    "tokenizer_mode",
    "provider",
    "dimension",
    "code_length",
    "model",
    "service_endpoint",
    "batch_size",
    "request_timeout_secs",
    "retry_attempts",
    "hash_seed",
    "search_type",
    "top_n",
    "similarity",
    "hnsw_m",
    "hnsw_efc",
    "hnsw_efs",
    "seed",
    "source",
    "manifest",
    "output_dir",
    "cache_dir",
    "instrument",
    "threads",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub extraction: ExtractionConfig,
    pub embedder: EmbedderConfig,
    pub search: SearchParams,
    pub hnsw: HnswParams,
    pub source: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Directory holding extracted fragments and their embeddings; when it
    /// already has both, detection skips inference.
    pub cache_dir: Option<PathBuf>,
    /// Writes `timing.json` next to the report.
    pub instrument: bool,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            extraction: ExtractionConfig::default(),
            embedder: EmbedderConfig::default(),
            search: SearchParams::default(),
            hnsw: HnswParams::default(),
            source: None,
            manifest: None,
            output_dir: PathBuf::from("sscd-out"),
            cache_dir: None,
            instrument: true,
            threads: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        key: key.to_owned(),
        value: value.to_owned(),
        reason: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key: key.to_owned(),
            value: value.to_owned(),
            reason: "expected a boolean".into(),
        }),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    /// Applies one key-value setting. Keys may use `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let k = key.as_str();
        match k {
            "min_loc" => self.extraction.min_loc = parse(k, value)?,
            "strip_comments" => self.extraction.strip_comments = parse_bool(k, value)?,
            "language" => self.extraction.language = parse::<Language>(k, value)?,
            "tokenizer_mode" => self.extraction.tokenizer_mode = parse::<TokenizerMode>(k, value)?,
            "provider" => self.embedder.provider = parse::<ProviderKind>(k, value)?,
            "dimension" => self.embedder.dimension = parse(k, value)?,
            "code_length" => self.embedder.code_length = parse(k, value)?,
            "model" => self.embedder.model_name = value.trim().to_owned(),
            "service_endpoint" => {
                let v = value.trim();
                self.embedder.service_endpoint = (!v.is_empty()).then(|| v.to_owned());
            }
            "batch_size" => self.embedder.batch_size = parse(k, value)?,
            "request_timeout_secs" => self.embedder.request_timeout = Duration::from_secs_f64(parse(k, value)?),
            "retry_attempts" => self.embedder.retry.attempts = parse(k, value)?,
            "hash_seed" => self.embedder.seed = parse(k, value)?,
            "search_type" => self.search.search_type = parse::<SearchType>(k, value)?,
            "top_n" => self.search.k = parse(k, value)?,
            "similarity" => self.search.similarity_floor = parse(k, value)?,
            "hnsw_m" => self.hnsw.m = parse(k, value)?,
            "hnsw_efc" => self.hnsw.ef_construction = parse(k, value)?,
            "hnsw_efs" => self.search.ef_search = parse(k, value)?,
            "seed" => self.hnsw.seed = parse(k, value)?,
            "source" => self.source = optional_path(value),
            "manifest" => self.manifest = optional_path(value),
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "cache_dir" => self.cache_dir = optional_path(value),
            "instrument" => self.instrument = parse_bool(k, value)?,
            "threads" => {
                let n: usize = parse(k, value)?;
                self.threads = (n > 0).then_some(n);
            }
            _ => return Err(ConfigError::UnknownKey(key)),
        }
        Ok(())
    }

    /// Applies `SSCD_<KEY>` variables from `vars`.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else { continue };
            let key = key.to_ascii_lowercase();
            if KEYS.contains(&key.as_str()) {
                self.set(&key, &value)?;
            }
        }
        Ok(())
    }

    /// Applies a flat TOML document.
    pub fn apply_toml(&mut self, text: &str, path: &Path) -> Result<(), ConfigError> {
        let file_err = |message: String| ConfigError::File { path: path.display().to_string(), message };
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| file_err(e.to_string()))?;
        for (key, value) in table {
            let rendered = match value {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                other => return Err(file_err(format!("`{key}` must be a scalar, found {}", other.type_str()))),
            };
            self.set(&key, &rendered).map_err(|e| file_err(e.to_string()))?;
        }
        Ok(())
    }

    /// Defaults, then the process environment, then `file`, then `overrides`.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        Self::load_with_env(file, overrides, std::env::vars())
    }

    pub fn load_with_env<I>(file: Option<&Path>, overrides: &[(String, String)], env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut cfg = RunConfig::default();
        cfg.apply_env(env)?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::File { path: path.display().to_string(), message: e.to_string() })?;
            cfg.apply_toml(&text, path)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.embedder.validate().map_err(|e| invalid(&e))?;
        self.search.validate().map_err(|e| invalid(&e))?;
        if self.search.search_type == SearchType::Hnsw {
            self.hnsw.validate().map_err(|e| invalid(&e))?;
        }
        if self.threads == Some(0) {
            return Err(ConfigError::Invalid("threads must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn default_index_parameters() {
        let c = RunConfig::default();
        assert_eq!((c.hnsw.m, c.hnsw.ef_construction, c.search.ef_search), (32, 200, 120));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn precedence_env_file_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "top_n = 5\nsimilarity = 0.9\nsearch_type = \"hnsw\"\n").unwrap();
        let vars = env(&[("SSCD_TOP_N", "3"), ("SSCD_MIN_LOC", "8"), ("HOME", "/x")]);
        let flags = vec![("top-n".to_string(), "7".to_string())];
        let c = RunConfig::load_with_env(Some(&path), &flags, vars).unwrap();
        assert_eq!(c.search.k, 7);
        assert_eq!(c.search.similarity_floor, 0.9);
        assert_eq!(c.extraction.min_loc, 8);
        assert_eq!(c.search.search_type, SearchType::Hnsw);
        let c = RunConfig::load_with_env(Some(&path), &[], env(&[("SSCD_TOP_N", "3")])).unwrap();
        assert_eq!(c.search.k, 5);
    }

    #[test]
    fn every_key_is_settable() {
        let samples = [
            ("min_loc", "4"),
            ("strip_comments", "false"),
            ("language", "java"),
            ("tokenizer_mode", "raw"),
            ("provider", "hash"),
            ("dimension", "128"),
            ("code_length", "512"),
            ("model", "m"),
            ("service_endpoint", "http://h:1"),
            ("batch_size", "8"),
            ("request_timeout_secs", "2.5"),
            ("retry_attempts", "1"),
            ("hash_seed", "3"),
            ("search_type", "exact"),
            ("top_n", "1"),
            ("similarity", "0.5"),
            ("hnsw_m", "8"),
            ("hnsw_efc", "40"),
            ("hnsw_efs", "30"),
            ("seed", "11"),
            ("source", "src"),
            ("manifest", "m.jsonl"),
            ("output_dir", "out"),
            ("cache_dir", "cache"),
            ("instrument", "no"),
            ("threads", "2"),
        ];
        assert_eq!(samples.len(), KEYS.len());
        let mut c = RunConfig::default();
        for (k, v) in samples {
            assert!(KEYS.contains(&k));
            c.set(k, v).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
        assert_eq!(c.extraction.language, Language::Java);
        assert_eq!(c.embedder.request_timeout, Duration::from_millis(2500));
        assert_eq!(c.threads, Some(2));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn bad_inputs() {
        let mut c = RunConfig::default();
        assert!(matches!(c.set("colour", "red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(c.set("top_n", "many"), Err(ConfigError::InvalidValue { .. })));
        assert!(c.apply_toml("[nested]\nx = 1\n", Path::new("c.toml")).is_err());
        c.set("similarity", "1.5").unwrap();
        assert!(c.validate().is_err());
    }
}
