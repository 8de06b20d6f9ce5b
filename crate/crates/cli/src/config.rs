//! Application configuration: a TOML document, overridden by environment
//! variables, overridden by command-line flags.
//!
//! Relative paths in the file are resolved against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kbc_core::answer_source::DEFAULT_BUDGET;
use kbc_core::eval_harness::Method;
use kbc_core::mkg_builder::{QueryConfig, DEFAULT_K, DEFAULT_PARALLELISM, DEFAULT_T};
use kbc_core::rule_catalog::{DEFAULT_MIN_CONFIDENCE, DEFAULT_MIN_SUPPORT};
use serde::Deserialize;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    kb: Option<PathBuf>,
    rules: Option<PathBuf>,
    port: Option<u16>,
    parallelism: Option<usize>,
    seed: Option<u64>,
    #[serde(default)]
    provider: FileProvider,
    #[serde(default)]
    query: FileQuery,
    #[serde(default)]
    weights: FileWeights,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileProvider {
    source: Option<String>,
    budget: Option<usize>,
    timeout_ms: Option<u64>,
    delay_ms: Option<u64>,
    cache: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileQuery {
    t: Option<f64>,
    k: Option<usize>,
    method: Option<String>,
    min_confidence: Option<f64>,
    min_support: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileWeights {
    frequency: Option<PathBuf>,
    importance: Option<PathBuf>,
    ensemble: Option<PathBuf>,
}

/// Where QA answers come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSource {
    None,
    Fixture(PathBuf),
    Remote(String),
}

impl ProviderSource {
    fn parse(raw: &str, base: &Path) -> Self {
        if raw == "none" || raw.is_empty() {
            ProviderSource::None
        } else if raw.starts_with("http://") || raw.starts_with("https://") {
            ProviderSource::Remote(raw.trim_end_matches('/').to_string())
        } else {
            ProviderSource::Fixture(base.join(raw))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub source: ProviderSource,
    pub timeout_ms: u64,
    /// Artificial delay before every provider call, for latency experiments.
    pub delay_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub kb: PathBuf,
    pub rules: PathBuf,
    pub provider: ProviderConfig,
    pub query: QueryConfig,
    pub method: Method,
    pub min_confidence: f64,
    pub min_support: u64,
    pub frequency_weights: Option<PathBuf>,
    pub importance_weights: Option<PathBuf>,
    pub ensemble_model: Option<PathBuf>,
    pub port: u16,
    pub seed: u64,
}

/// Values given on the command line or through the environment. `None`
/// falls through to the config file, then to the built-in default.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kb: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub provider: Option<String>,
    pub frequency_weights: Option<PathBuf>,
    pub importance_weights: Option<PathBuf>,
    pub ensemble_model: Option<PathBuf>,
    pub t: Option<f64>,
    pub k: Option<usize>,
    pub method: Option<Method>,
    pub parallelism: Option<usize>,
    pub budget: Option<usize>,
    pub delay_ms: Option<u64>,
    pub port: Option<u16>,
    pub seed: Option<u64>,
}

impl AppConfig {
    pub fn resolve(config_file: Option<&Path>, o: &Overrides) -> Result<AppConfig> {
        let (file, base) = match config_file {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                let file: FileConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
                (file, path.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (FileConfig::default(), PathBuf::new()),
        };
        let from_file = |p: &Option<PathBuf>| p.as_ref().map(|p| base.join(p));

        let kb = o.kb.clone().or(from_file(&file.kb)).context("no knowledge base file configured (--kb, KBC_KB or `kb` in the config file)")?;
        let rules = o.rules.clone().or(from_file(&file.rules)).context("no rule file configured (--rules, KBC_RULES or `rules` in the config file)")?;
        let source = match (&o.provider, &file.provider.source) {
            (Some(flag), _) => ProviderSource::parse(flag, Path::new("")),
            (None, Some(raw)) => ProviderSource::parse(raw, &base),
            (None, None) => ProviderSource::None,
        };
        let method = match (o.method, &file.query.method) {
            (Some(m), _) => m,
            (None, Some(raw)) => raw.parse().map_err(anyhow::Error::msg)?,
            (None, None) => Method::MpfImportance,
        };
        let query = QueryConfig {
            t: o.t.or(file.query.t).unwrap_or(DEFAULT_T),
            k: o.k.or(file.query.k).unwrap_or(DEFAULT_K),
            parallelism: o.parallelism.or(file.parallelism).unwrap_or(DEFAULT_PARALLELISM),
            budget: o.budget.or(file.provider.budget).unwrap_or(DEFAULT_BUDGET),
            cache: file.provider.cache.unwrap_or(true),
        };
        if let Err(msg) = query.validate() {
            bail!("invalid query configuration: {msg}");
        }
        let min_confidence = file.query.min_confidence.unwrap_or(DEFAULT_MIN_CONFIDENCE);
        let min_support = file.query.min_support.unwrap_or(DEFAULT_MIN_SUPPORT);
        if !(0.0..=1.0).contains(&min_confidence) {
            bail!("min_confidence must be in [0, 1], got {min_confidence}");
        }
        Ok(AppConfig {
            kb,
            rules,
            provider: ProviderConfig {
                source,
                timeout_ms: file.provider.timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS),
                delay_ms: o.delay_ms.or(file.provider.delay_ms).unwrap_or(0),
            },
            query,
            method,
            min_confidence,
            min_support,
            frequency_weights: o.frequency_weights.clone().or(from_file(&file.weights.frequency)),
            importance_weights: o.importance_weights.clone().or(from_file(&file.weights.importance)),
            ensemble_model: o.ensemble_model.clone().or(from_file(&file.weights.ensemble)),
            port: o.port.or(file.port).unwrap_or(DEFAULT_PORT),
            seed: o.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        })
    }
}
