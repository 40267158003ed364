//! Run configuration: defaults, then a TOML (or JSON) file, then flag
//! overrides.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::PipelineConfig;
use crate::retrieval::{RerankFallback, RetrievalBudget};

pub const API_KEY_ENV: &str = "GRAPHCHECK_API_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("both a backend URL and a mock script are set; choose one")]
    ConflictingBackends,
    #[error("no backend configured: set backend.url or backend.mock_script")]
    NoBackend,
    #[error("invalid config: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    pub url: Option<String>,
    pub model: String,
    pub timeout_secs: u64,
    pub retries: u32,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub mock_script: Option<PathBuf>,
    pub exemplars: Option<PathBuf>,
}

impl Default for BackendSettings {
    fn default() -> Self {
        BackendSettings {
            url: None,
            model: "default".into(),
            timeout_secs: 120,
            retries: 2,
            temperature: 0.0,
            max_output_tokens: 512,
            mock_script: None,
            exemplars: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSettings {
    pub index: Option<PathBuf>,
    pub top_k: usize,
    pub max_docs: usize,
    pub max_tokens: usize,
    pub k1: f64,
    pub b: f64,
    pub reranker_url: Option<String>,
    pub reranker_timeout_secs: u64,
    pub rerank_fallback: RerankFallback,
    pub min_score: Option<f64>,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        let budget = RetrievalBudget::default();
        RetrievalSettings {
            index: None,
            top_k: 50,
            max_docs: budget.max_docs,
            max_tokens: budget.max_tokens,
            k1: 1.2,
            b: 0.75,
            reranker_url: None,
            reranker_timeout_secs: 30,
            rerank_fallback: RerankFallback::Fail,
            min_score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    pub max_iterations: u32,
    pub exhaustive: bool,
    pub claim_timeout_secs: u64,
    pub workers: usize,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            max_iterations: 5,
            exhaustive: false,
            claim_timeout_secs: 300,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub trace_dir: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub backend: BackendSettings,
    pub retrieval: RetrievalSettings,
    pub pipeline: PipelineSettings,
    pub output: OutputSettings,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 42,
            backend: BackendSettings::default(),
            retrieval: RetrievalSettings::default(),
            pipeline: PipelineSettings::default(),
            output: OutputSettings::default(),
        }
    }
}

/// Command-line values; `Some` wins over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub backend_url: Option<String>,
    pub model: Option<String>,
    pub mock_script: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub top_k: Option<usize>,
    pub max_docs: Option<usize>,
    pub max_tokens: Option<usize>,
    pub reranker_url: Option<String>,
    pub max_iterations: Option<u32>,
    pub exhaustive: Option<bool>,
    pub claim_timeout_secs: Option<u64>,
    pub workers: Option<usize>,
    pub trace_dir: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendMode {
    Remote(String),
    Mock(PathBuf),
}

const KNOWN: &[(&str, &[&str])] = &[
    (
        "backend",
        &["url", "model", "timeout_secs", "retries", "temperature", "max_output_tokens", "mock_script", "exemplars"],
    ),
    (
        "retrieval",
        &[
            "index",
            "top_k",
            "max_docs",
            "max_tokens",
            "k1",
            "b",
            "reranker_url",
            "reranker_timeout_secs",
            "rerank_fallback",
            "min_score",
        ],
    ),
    ("pipeline", &["max_iterations", "exhaustive", "claim_timeout_secs", "workers"]),
    ("output", &["trace_dir", "report_dir"]),
];

fn unknown_keys(root: &toml::Table) -> Vec<String> {
    let mut out = BTreeSet::new();
    for (key, value) in root {
        if key == "seed" {
            continue;
        }
        match (KNOWN.iter().find(|(s, _)| s == key), value) {
            (Some((_, fields)), toml::Value::Table(t)) => {
                for k in t.keys() {
                    if !fields.contains(&k.as_str()) {
                        out.insert(format!("{key}.{k}"));
                    }
                }
            }
            (Some(_), _) => {}
            (None, _) => {
                out.insert(key.clone());
            }
        }
    }
    out.into_iter().collect()
}

fn read_table(path: &Path) -> Result<toml::Table, ConfigError> {
    let raw = fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let parse_err = |message: String| ConfigError::Parse {
        path: path.to_path_buf(),
        message,
    };
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = serde_json::from_str(&raw).map_err(|e| parse_err(e.to_string()))?;
        match toml::Value::try_from(v).map_err(|e| parse_err(e.to_string()))? {
            toml::Value::Table(t) => Ok(t),
            _ => Err(parse_err("top level must be an object".into())),
        }
    } else {
        raw.parse::<toml::Table>().map_err(|e| parse_err(e.to_string()))
    }
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Config, ConfigError> {
        let table = read_table(path)?;
        let unknown = unknown_keys(&table);
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        fn set_opt<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
            if src.is_some() {
                dst.clone_from(src);
            }
        }
        set_opt(&mut self.backend.url, &o.backend_url);
        set(&mut self.backend.model, &o.model);
        set_opt(&mut self.backend.mock_script, &o.mock_script);
        set_opt(&mut self.retrieval.index, &o.index);
        set(&mut self.retrieval.top_k, &o.top_k);
        set(&mut self.retrieval.max_docs, &o.max_docs);
        set(&mut self.retrieval.max_tokens, &o.max_tokens);
        set_opt(&mut self.retrieval.reranker_url, &o.reranker_url);
        set(&mut self.pipeline.max_iterations, &o.max_iterations);
        set(&mut self.pipeline.exhaustive, &o.exhaustive);
        set(&mut self.pipeline.claim_timeout_secs, &o.claim_timeout_secs);
        set(&mut self.pipeline.workers, &o.workers);
        set_opt(&mut self.output.trace_dir, &o.trace_dir);
        set_opt(&mut self.output.report_dir, &o.report_dir);
        set(&mut self.seed, &o.seed);
    }

    /// Every problem found, not just the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.backend.url.is_some() && self.backend.mock_script.is_some() {
            return Err(ConfigError::ConflictingBackends);
        }
        let mut problems = Vec::new();
        let mut positive = |name: &str, ok: bool| {
            if !ok {
                problems.push(format!("{name} must be positive"));
            }
        };
        positive("backend.timeout_secs", self.backend.timeout_secs > 0);
        positive("backend.max_output_tokens", self.backend.max_output_tokens > 0);
        positive("retrieval.top_k", self.retrieval.top_k > 0);
        positive("retrieval.max_docs", self.retrieval.max_docs > 0);
        positive("retrieval.max_tokens", self.retrieval.max_tokens > 0);
        positive("retrieval.k1", self.retrieval.k1 > 0.0);
        positive("retrieval.reranker_timeout_secs", self.retrieval.reranker_timeout_secs > 0);
        positive("pipeline.claim_timeout_secs", self.pipeline.claim_timeout_secs > 0);
        positive("pipeline.workers", self.pipeline.workers > 0);
        if !(0.0..=1.0).contains(&self.retrieval.b) {
            problems.push("retrieval.b must be in [0, 1]".into());
        }
        if self.backend.temperature.is_nan() || self.backend.temperature < 0.0 {
            problems.push("backend.temperature must be non-negative".into());
        }
        if self.backend.url.as_deref().is_some_and(str::is_empty) {
            problems.push("backend.url is empty".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    pub fn backend_mode(&self) -> Result<BackendMode, ConfigError> {
        match (&self.backend.url, &self.backend.mock_script) {
            (Some(_), Some(_)) => Err(ConfigError::ConflictingBackends),
            (Some(u), None) => Ok(BackendMode::Remote(u.clone())),
            (None, Some(p)) => Ok(BackendMode::Mock(p.clone())),
            (None, None) => Err(ConfigError::NoBackend),
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            max_iterations: self.pipeline.max_iterations,
            exhaustive: self.pipeline.exhaustive,
            claim_timeout: Duration::from_secs(self.pipeline.claim_timeout_secs),
            workers: self.pipeline.workers,
        }
    }

    pub fn budget(&self) -> RetrievalBudget {
        RetrievalBudget {
            max_docs: self.retrieval.max_docs,
            max_tokens: self.retrieval.max_tokens,
        }
    }
}

/// Defaults, then `file` if given, then `overrides`; validated.
pub fn parse_config(file: Option<&Path>, overrides: &Overrides) -> Result<Config, ConfigError> {
    let mut config = match file {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    config.apply(overrides);
    config.validate()?;
    Ok(config)
}
