//! Loaded artifacts and the completion response shared by the CLI and the
//! service.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use kbc_core::answer_source::{AnswerProvider, DelayedProvider, FixtureProvider};
use kbc_core::error::EvalError;
use kbc_core::eval_harness::{Calibration, Method, Ranker};
use kbc_core::kb_store::FactStore;
use kbc_core::mkg_builder::QueryConfig;
use kbc_core::path_fusion::{read_weights, WeightSet};
use kbc_core::rule_catalog::{filter_rules, parse_rules, Rule};
use serde::{Deserialize, Serialize};

use crate::config::{AppConfig, ProviderSource};

/// Everything a query needs, immutable once loaded.
pub struct Artifacts {
    pub store: FactStore,
    pub rules: Vec<Rule>,
    pub provider: Box<dyn AnswerProvider>,
    pub frequency: Option<WeightSet>,
    pub importance: Option<WeightSet>,
    pub calibration: BTreeMap<String, Calibration>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

pub fn load_weights(path: &Path) -> Result<WeightSet> {
    read_weights(open(path)?).with_context(|| format!("reading weights {}", path.display()))
}

pub fn build_provider(config: &AppConfig) -> Result<Box<dyn AnswerProvider>> {
    let base: Box<dyn AnswerProvider> = match &config.provider.source {
        ProviderSource::None => Box::new(FixtureProvider::empty()),
        ProviderSource::Fixture(path) => Box::new(
            FixtureProvider::load_fixture(open(path)?).with_context(|| format!("reading QA fixture {}", path.display()))?,
        ),
        ProviderSource::Remote(url) => remote(url, Duration::from_millis(config.provider.timeout_ms))?,
    };
    Ok(match config.provider.delay_ms {
        0 => base,
        ms => Box::new(DelayedProvider::new(base, Duration::from_millis(ms))),
    })
}

#[cfg(feature = "remote")]
fn remote(url: &str, timeout: Duration) -> Result<Box<dyn AnswerProvider>> {
    Ok(Box::new(kbc_core::answer_source::RemoteProvider::new(url, timeout)))
}

#[cfg(not(feature = "remote"))]
fn remote(url: &str, _timeout: Duration) -> Result<Box<dyn AnswerProvider>> {
    anyhow::bail!("remote provider {url} requested but this build has no remote support")
}

impl Artifacts {
    /// Loads every configured artifact, failing on the first unreadable one.
    pub fn load(config: &AppConfig) -> Result<Artifacts> {
        let mut artifacts = Self::load_inputs(config)?;
        artifacts.frequency = config.frequency_weights.as_deref().map(load_weights).transpose()?;
        artifacts.importance = config.importance_weights.as_deref().map(load_weights).transpose()?;
        if let Some(path) = &config.ensemble_model {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            artifacts.calibration =
                serde_json::from_str(&text).with_context(|| format!("parsing ensemble model {}", path.display()))?;
        }
        Ok(artifacts)
    }

    /// Loads the KB, rules and provider only; weights are left empty.
    pub fn load_inputs(config: &AppConfig) -> Result<Artifacts> {
        let store = FactStore::load_triples(open(&config.kb)?).with_context(|| format!("reading KB {}", config.kb.display()))?;
        let parsed = parse_rules(open(&config.rules)?).with_context(|| format!("reading rules {}", config.rules.display()))?;
        let rules = filter_rules(&parsed, config.min_confidence, config.min_support);
        log::info!("loaded {} facts, {} of {} rules", store.len(), rules.len(), parsed.len());
        Ok(Artifacts {
            store,
            rules,
            provider: build_provider(config)?,
            frequency: None,
            importance: None,
            calibration: BTreeMap::new(),
        })
    }

    pub fn ranker(&self, query: QueryConfig) -> Ranker<'_> {
        let mut ranker = Ranker::new(&self.store, &self.rules, self.provider.as_ref(), query);
        ranker.frequency = self.frequency.as_ref();
        ranker.importance = self.importance.as_ref();
        ranker.calibration = self.calibration.clone();
        ranker
    }

    pub fn complete(&self, request: &CompletionRequest, base: QueryConfig) -> Result<CompletionResponse, EvalError> {
        let start = Instant::now();
        let query = QueryConfig { t: request.t.unwrap_or(base.t), k: request.k.unwrap_or(base.k), ..base };
        query.validate().map_err(EvalError::Config)?;
        let ranking = self.ranker(query).rank(request.method, &request.subject, &request.relation, &BTreeSet::new())?;
        Ok(CompletionResponse {
            query: QueryEcho {
                subject: request.subject.clone(),
                relation: request.relation.clone(),
                method: request.method,
                t: query.t,
                k: query.k,
            },
            answers: ranking
                .answers
                .into_iter()
                .map(|a| Answer {
                    entity: a.entity,
                    score: a.score,
                    paths: a
                        .paths
                        .into_iter()
                        .map(|p| PathScore { signature: p.signature, score: p.score, weight: p.weight })
                        .collect(),
                })
                .collect(),
            stats: Stats {
                provider_calls: ranking.stats.provider_calls,
                elapsed_ms: start.elapsed().as_millis() as u64,
                degraded: ranking.stats.degraded,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub subject: String,
    pub relation: String,
    pub method: Method,
    pub t: Option<f64>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEcho {
    pub subject: String,
    pub relation: String,
    pub method: Method,
    pub t: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathScore {
    pub signature: String,
    pub score: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub entity: String,
    pub score: f64,
    pub paths: Vec<PathScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub provider_calls: usize,
    pub elapsed_ms: u64,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub query: QueryEcho,
    pub answers: Vec<Answer>,
    pub stats: Stats,
}
