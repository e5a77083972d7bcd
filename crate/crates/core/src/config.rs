//! Run configuration: a TOML file with defaults for every knob the
//! pipelines use, validated at load time.
//!
//! Credentials never live in the file — each provider names the environment
//! variable that holds its key. Paths are resolved relative to the working
//! directory and must exist when the config is loaded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::FileFormat;
use crate::lexical::CmpMode;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("config: {key}: {constraint}")]
    Invalid { key: String, constraint: String },
    #[error("config: {key} = '{path}' does not exist")]
    MissingPath { key: String, path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Http,
    Stub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubChatKind {
    Fixed,
    LetterByHash,
    Gibberish,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchProviderKind {
    Http,
    Empty,
    DatasetEcho,
    Scripted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    pub provider: ProviderKind,
    /// Chat-completions base URL; falls back to $MODEL_API_BASE.
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Wire model identifier; defaults to `name`.
    #[serde(default)]
    pub model_id: Option<String>,
    /// Name of the env var holding the API key; defaults to MODEL_API_KEY.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default)]
    pub rate_per_sec: Option<f64>,
    #[serde(default)]
    pub stub_mode: Option<StubChatKind>,
    #[serde(default)]
    pub stub_text: Option<String>,
    #[serde(default)]
    pub script: Option<PathBuf>,
}

impl ModelConfig {
    pub fn model_id(&self) -> &str {
        self.model_id.as_deref().unwrap_or(&self.name)
    }

    pub fn auth_env(&self) -> &str {
        self.auth_env.as_deref().unwrap_or("MODEL_API_KEY")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    pub provider: SearchProviderKind,
    /// Full search endpoint URL (http provider only).
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default)]
    pub rate_per_sec: Option<f64>,
    #[serde(default)]
    pub script: Option<PathBuf>,
}

impl SearchConfig {
    pub fn auth_env(&self) -> &str {
        self.auth_env.as_deref().unwrap_or("SEARCH_API_KEY")
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            provider: SearchProviderKind::Empty,
            endpoint: None,
            auth_env: None,
            rate_per_sec: None,
            script: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exp2Config {
    #[serde(default = "default_exp2_subjects")]
    pub subjects: Vec<String>,
    #[serde(default = "default_exp2_total")]
    pub total: usize,
}

impl Default for Exp2Config {
    fn default() -> Self {
        Exp2Config {
            subjects: default_exp2_subjects(),
            total: default_exp2_total(),
        }
    }
}

fn default_exp2_subjects() -> Vec<String> {
    [
        "high_school_us_history",
        "professional_law",
        "college_computer_science",
        "high_school_mathematics",
        "high_school_biology",
        "moral_scenarios",
    ]
    .map(String::from)
    .to_vec()
}

fn default_exp2_total() -> usize {
    100
}

fn default_seed() -> u64 {
    42
}
fn default_threshold() -> f64 {
    0.30
}
fn default_ngram_size() -> usize {
    8
}
fn default_top_k() -> usize {
    5
}
fn default_per_subject() -> u32 {
    9
}
fn default_parallelism() -> usize {
    4
}
fn default_cache_dir() -> PathBuf {
    PathBuf::from("cache")
}
fn default_max_retries() -> u32 {
    3
}
fn default_retry_base_ms() -> u64 {
    250
}
fn default_timeout_secs() -> u64 {
    60
}
fn default_mcq_max_tokens() -> u32 {
    16
}
fn default_probe_max_tokens() -> u32 {
    256
}
fn default_generator_temperature() -> f64 {
    0.7
}
fn default_min_word_len() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    #[serde(default)]
    pub dataset_format: Option<FileFormat>,
    #[serde(default)]
    pub category_map: Option<PathBuf>,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub threshold_mode: CmpMode,
    #[serde(default = "default_ngram_size")]
    pub ngram_size: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_per_subject")]
    pub per_subject: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_retry_base_ms")]
    pub retry_base_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_mcq_max_tokens")]
    pub mcq_max_tokens: u32,
    #[serde(default = "default_probe_max_tokens")]
    pub probe_max_tokens: u32,
    #[serde(default = "default_generator_temperature")]
    pub generator_temperature: f64,
    #[serde(default = "default_min_word_len")]
    pub min_word_len: usize,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub generator_model: Option<String>,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub exp2: Exp2Config,
    /// Reported accuracy per group for EPG: keys are subjects, categories,
    /// or "all"; subjects fall back to their category, then to "all".
    #[serde(default)]
    pub accuracies: BTreeMap<String, f64>,
}

impl RunConfig {
    pub fn dataset_format(&self) -> FileFormat {
        self.dataset_format
            .unwrap_or_else(|| FileFormat::from_path(&self.dataset))
    }

    pub fn model(&self, name: &str) -> Option<&ModelConfig> {
        self.models.iter().find(|m| m.name == name)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, constraint: &str| ConfigError::Invalid {
            key: key.to_string(),
            constraint: constraint.to_string(),
        };
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(invalid("threshold", "must be in (0,1]"));
        }
        if self.ngram_size == 0 {
            return Err(invalid("ngram_size", "must be >= 1"));
        }
        if self.top_k == 0 {
            return Err(invalid("top_k", "must be >= 1"));
        }
        if self.parallelism == 0 {
            return Err(invalid("parallelism", "must be >= 1"));
        }
        if !self.generator_temperature.is_finite() || self.generator_temperature < 0.0 {
            return Err(invalid("generator_temperature", "must be finite and >= 0"));
        }
        if self.min_word_len == 0 {
            return Err(invalid("min_word_len", "must be >= 1"));
        }
        for (group, accuracy) in &self.accuracies {
            if !(0.0..=1.0).contains(accuracy) {
                return Err(invalid(
                    &format!("accuracies.{group}"),
                    "must be in [0,1]",
                ));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for model in &self.models {
            if !seen.insert(&model.name) {
                return Err(invalid(
                    &format!("models.{}", model.name),
                    "duplicate model name",
                ));
            }
            if model.provider == ProviderKind::Stub && model.stub_mode.is_none() {
                return Err(invalid(
                    &format!("models.{}.stub_mode", model.name),
                    "required for stub providers",
                ));
            }
            if model.stub_mode == Some(StubChatKind::Fixed) && model.stub_text.is_none() {
                return Err(invalid(
                    &format!("models.{}.stub_text", model.name),
                    "required for fixed stubs",
                ));
            }
            if model.stub_mode == Some(StubChatKind::Scripted) && model.script.is_none() {
                return Err(invalid(
                    &format!("models.{}.script", model.name),
                    "required for scripted stubs",
                ));
            }
        }
        if let Some(generator) = &self.generator_model {
            if self.model(generator).is_none() {
                return Err(invalid(
                    "generator_model",
                    "must name a model from the models list",
                ));
            }
        }
        if self.search.provider == SearchProviderKind::Http && self.search.endpoint.is_none() {
            return Err(invalid("search.endpoint", "required for http search"));
        }
        if self.search.provider == SearchProviderKind::Scripted && self.search.script.is_none() {
            return Err(invalid("search.script", "required for scripted search"));
        }
        Ok(())
    }

    fn check_paths(&self) -> Result<(), ConfigError> {
        let mut required: Vec<(&str, &Path)> = vec![("dataset", self.dataset.as_path())];
        if let Some(p) = &self.category_map {
            required.push(("category_map", p));
        }
        if let Some(p) = &self.stopwords {
            required.push(("stopwords", p));
        }
        for model in &self.models {
            if let Some(p) = &model.script {
                required.push(("models.script", p));
            }
        }
        if let Some(p) = &self.search.script {
            required.push(("search.script", p));
        }
        for (key, path) in required {
            if !path.exists() {
                return Err(ConfigError::MissingPath {
                    key: key.to_string(),
                    path: path.display().to_string(),
                });
            }
        }
        Ok(())
    }

    /// A short id capturing everything that affects run *outputs*: seeds,
    /// thresholds, model set, accuracies, and the sample digest — but no
    /// filesystem paths, so relocating a run does not change its identity.
    pub fn run_id(&self, sample_digest: Option<&str>) -> String {
        #[derive(Serialize)]
        struct Semantic<'a> {
            seed: u64,
            threshold: f64,
            threshold_mode: CmpMode,
            ngram_size: usize,
            top_k: usize,
            per_subject: u32,
            min_word_len: usize,
            mcq_max_tokens: u32,
            probe_max_tokens: u32,
            generator_temperature: f64,
            models: Vec<(&'a str, ProviderKind, &'a str, Option<StubChatKind>, Option<&'a str>)>,
            generator_model: &'a Option<String>,
            search_provider: SearchProviderKind,
            exp2_subjects: &'a [String],
            exp2_total: usize,
            accuracies: &'a BTreeMap<String, f64>,
            sample_digest: Option<&'a str>,
        }
        let semantic = Semantic {
            seed: self.seed,
            threshold: self.threshold,
            threshold_mode: self.threshold_mode,
            ngram_size: self.ngram_size,
            top_k: self.top_k,
            per_subject: self.per_subject,
            min_word_len: self.min_word_len,
            mcq_max_tokens: self.mcq_max_tokens,
            probe_max_tokens: self.probe_max_tokens,
            generator_temperature: self.generator_temperature,
            models: self
                .models
                .iter()
                .map(|m| {
                    (
                        m.name.as_str(),
                        m.provider,
                        m.model_id(),
                        m.stub_mode,
                        m.stub_text.as_deref(),
                    )
                })
                .collect(),
            generator_model: &self.generator_model,
            search_provider: self.search.provider,
            exp2_subjects: &self.exp2.subjects,
            exp2_total: self.exp2.total,
            accuracies: &self.accuracies,
            sample_digest,
        };
        let bytes = serde_json::to_vec(&semantic).expect("serializable");
        hex::encode(&Sha256::digest(&bytes)[..6])
    }
}

/// Parse, validate, and path-check a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let config: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    config.validate()?;
    config.check_paths()?;
    Ok(config)
}
