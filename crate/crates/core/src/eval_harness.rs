//! Dataset sampling under the local closed-world assumption, AP/MAP, and
//! the multi-method benchmark.
//!
//! Average precision is the standard `sum_k p(k) * delta_r(k)` with recall
//! measured against the full truth set; it is not divided by the list
//! length.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::io::BufRead;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::answer_source::{AnswerProvider, ProbeSession};
use crate::baselines::{
    compute_lambda, ensemble_fuse, qa_scores, rule_scores, train_ensemble_model, EnsembleInputs, FusionMethod,
    RuleCombiner,
};
use crate::error::{EvalError, IngestError};
use crate::kb_store::{canonicalize, FactStore, FactView, MaskedView};
use crate::mkg_builder::{build_graph, GraphStats, QueryConfig};
use crate::parallel;
use crate::path_fusion::{score_answers, ScoredAnswer, WeightSet};
use crate::rule_catalog::{rules_for, Rule};
use crate::weight_learning::{LrHyperparameters, LrModel};

pub const DEFAULT_N_TRAIN: usize = 500;
pub const DEFAULT_N_TEST: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub subject: String,
    pub relation: String,
    pub truth: BTreeSet<String>,
}

impl EvalQuery {
    pub fn new<I, S>(subject: impl Into<String>, relation: impl Into<String>, truth: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        EvalQuery { subject: subject.into(), relation: relation.into(), truth: truth.into_iter().map(Into::into).collect() }
    }
}

pub fn average_precision<S: AsRef<str>>(ranked: &[S], truth: &BTreeSet<String>) -> Result<f64, EvalError> {
    if truth.is_empty() {
        return Err(EvalError::EmptyTruth);
    }
    // precisions are summed first and divided once, so a perfect ranking is exactly 1
    let mut hits = 0usize;
    let mut seen = BTreeSet::new();
    let mut precision_sum = 0.0;
    for (i, entity) in ranked.iter().enumerate() {
        let entity = entity.as_ref();
        if truth.contains(entity) && seen.insert(entity) {
            hits += 1;
            precision_sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(precision_sum / truth.len() as f64)
}

pub fn mean(aps: &[f64]) -> Result<f64, EvalError> {
    if aps.is_empty() {
        return Err(EvalError::NoQueries);
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

pub fn mean_average_precision<S: AsRef<str>>(queries: &[(Vec<S>, BTreeSet<String>)]) -> Result<f64, EvalError> {
    let aps = queries
        .iter()
        .map(|(ranked, truth)| average_precision(ranked, truth))
        .collect::<Result<Vec<_>, _>>()?;
    mean(&aps)
}

/// Samples distinct subjects of `relation` uniformly (seeded) and splits
/// them into train and test queries whose truth is every stored object.
pub fn sample_dataset(
    store: &FactStore,
    relation: &str,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Vec<EvalQuery>, Vec<EvalQuery>), EvalError> {
    let mut subjects = store.subjects_with(relation);
    let requested = n_train + n_test;
    if subjects.len() < requested {
        return Err(EvalError::InsufficientSubjects { relation: relation.to_string(), available: subjects.len(), requested });
    }
    subjects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let to_query = |s: &&str| EvalQuery::new(*s, relation, store.objects_of(s, relation));
    let train = subjects[..n_train].iter().map(to_query).collect();
    let test = subjects[n_train..requested].iter().map(to_query).collect();
    Ok((train, test))
}

pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<EvalQuery>, IngestError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(canonicalize).collect();
        if fields.len() != 3 {
            return Err(IngestError::FieldCount { source_name: "dataset", line: lineno, expected: 3, found: fields.len() });
        }
        let truth: BTreeSet<String> = fields[2].split(',').map(canonicalize).filter(|s| !s.is_empty()).map(String::from).collect();
        if fields[0].is_empty() || fields[1].is_empty() || truth.is_empty() {
            return Err(IngestError::Invalid { source_name: "dataset", line: lineno, message: "empty subject, relation or truth set".into() });
        }
        out.push(EvalQuery { subject: fields[0].to_string(), relation: fields[1].to_string(), truth });
    }
    Ok(out)
}

pub fn read_dataset_str(text: &str) -> Result<Vec<EvalQuery>, IngestError> {
    read_dataset(text.as_bytes())
}

pub fn write_dataset(queries: &[EvalQuery]) -> String {
    let mut out = String::new();
    for q in queries {
        let truth: Vec<&str> = q.truth.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{}\t{}\t{}", q.subject, q.relation, truth.join(","));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Webqa,
    Rules,
    EnsembleLinear,
    EnsembleMax,
    EnsembleSum,
    EnsembleLr,
    MpfFrequency,
    MpfImportance,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Webqa,
        Method::Rules,
        Method::EnsembleLinear,
        Method::EnsembleMax,
        Method::EnsembleSum,
        Method::EnsembleLr,
        Method::MpfFrequency,
        Method::MpfImportance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Webqa => "webqa",
            Method::Rules => "rules",
            Method::EnsembleLinear => "ensemble-linear",
            Method::EnsembleMax => "ensemble-max",
            Method::EnsembleSum => "ensemble-sum",
            Method::EnsembleLr => "ensemble-lr",
            Method::MpfFrequency => "mpf-frequency",
            Method::MpfImportance => "mpf-importance",
        }
    }

    fn fusion(self) -> Option<FusionMethod> {
        match self {
            Method::EnsembleLinear => Some(FusionMethod::Linear),
            Method::EnsembleMax => Some(FusionMethod::Max),
            Method::EnsembleSum => Some(FusionMethod::Sum),
            Method::EnsembleLr => Some(FusionMethod::Lr),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-relation parameters of the ensemble baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub lambda: f64,
    pub train_map_qa: Option<f64>,
    pub train_map_rules: Option<f64>,
    pub lr_model: Option<LrModel>,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration { lambda: 0.5, train_map_qa: None, train_map_rules: None, lr_model: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub answers: Vec<ScoredAnswer>,
    pub stats: GraphStats,
}

impl Ranking {
    pub fn entities(&self) -> Vec<&str> {
        self.answers.iter().map(|a| a.entity.as_str()).collect()
    }
}

fn plain_answers(scores: Vec<(String, f64)>) -> Vec<ScoredAnswer> {
    scores.into_iter().map(|(entity, score)| ScoredAnswer { entity, score, paths: Vec::new() }).collect()
}

/// Everything needed to rank a query with any method.
pub struct Ranker<'a> {
    pub store: &'a FactStore,
    pub rules: &'a [Rule],
    pub provider: &'a dyn AnswerProvider,
    pub config: QueryConfig,
    pub frequency: Option<&'a WeightSet>,
    pub importance: Option<&'a WeightSet>,
    pub calibration: BTreeMap<String, Calibration>,
    pub rule_combiner: RuleCombiner,
}

impl<'a> Ranker<'a> {
    pub fn new(store: &'a FactStore, rules: &'a [Rule], provider: &'a dyn AnswerProvider, config: QueryConfig) -> Self {
        Ranker {
            store,
            rules,
            provider,
            config,
            frequency: None,
            importance: None,
            calibration: BTreeMap::new(),
            rule_combiner: RuleCombiner::Sum,
        }
    }

    /// Checks that `method` has what it needs for `relation`.
    pub fn check(&self, method: Method, relation: &str) -> Result<(), EvalError> {
        let missing = |what: &str| Err(EvalError::Config(format!("{method} needs a {what} weight table for relation {relation}")));
        match method {
            Method::MpfFrequency if !self.frequency.is_some_and(|w| w.contains_key(relation)) => missing("frequency"),
            Method::MpfImportance if !self.importance.is_some_and(|w| w.contains_key(relation)) => missing("importance"),
            Method::EnsembleLr if !self.calibration.get(relation).is_some_and(|c| c.lr_model.is_some()) => {
                Err(EvalError::Config(format!("ensemble-lr needs a trained model for relation {relation}")))
            }
            _ => Ok(()),
        }
    }

    /// Ranks `<subject, relation, ?>`. Facts in `hidden` are invisible to the KB side.
    pub fn rank(&self, method: Method, subject: &str, relation: &str, hidden: &BTreeSet<String>) -> Result<Ranking, EvalError> {
        self.check(method, relation)?;
        let view = MaskedView::hiding_answers(self.store, subject, relation, hidden);
        let rules = rules_for(self.rules, relation);
        let session = ProbeSession::new(self.provider, self.config.budget, self.config.cache);
        let mut stats = GraphStats::default();
        let answers = match method {
            Method::MpfFrequency | Method::MpfImportance => {
                let set = if method == Method::MpfFrequency { self.frequency } else { self.importance };
                let table = &set.expect("checked")[relation];
                let graph = build_graph(subject, relation, &rules, &view, &session, &self.config);
                let answers = score_answers(&graph, table);
                stats = graph.stats;
                answers
            }
            Method::Webqa => {
                let scores = self.qa_side(subject, relation, &session, &mut stats);
                let mut list: Vec<(String, f64)> = scores.into_iter().collect();
                crate::path_fusion::rank_by_score(&mut list, |(e, s)| (e.as_str(), *s));
                plain_answers(list)
            }
            Method::Rules => {
                let mut list: Vec<(String, f64)> =
                    rule_scores(subject, relation, &view, &rules, &self.rule_combiner).into_iter().collect();
                crate::path_fusion::rank_by_score(&mut list, |(e, s)| (e.as_str(), *s));
                plain_answers(list)
            }
            fused => {
                let qa = self.qa_side(subject, relation, &session, &mut stats);
                let rs = rule_scores(subject, relation, &view, &rules, &self.rule_combiner);
                let cal = self.calibration.get(relation).cloned().unwrap_or_default();
                let inputs = EnsembleInputs { qa_scores: qa, rule_scores: rs, lambda: cal.lambda, lr_model: cal.lr_model };
                plain_answers(ensemble_fuse(&inputs, fused.fusion().expect("ensemble method"))?)
            }
        };
        stats.provider_calls = session.calls();
        stats.degraded |= session.exhausted();
        Ok(Ranking { answers, stats })
    }

    fn qa_side(&self, subject: &str, relation: &str, session: &ProbeSession<'_>, stats: &mut GraphStats) -> BTreeMap<String, f64> {
        match qa_scores(subject, relation, session) {
            Ok(scores) => scores,
            Err(e) => {
                stats.degraded = true;
                stats.errors.push(e.to_string());
                BTreeMap::new()
            }
        }
    }

    /// Fits λ and the ensemble model for `relation` on training queries,
    /// with each query's truth hidden from the KB side.
    pub fn calibrate(&self, relation: &str, train: &[EvalQuery], hp: LrHyperparameters) -> Result<Calibration, EvalError> {
        let queries: Vec<&EvalQuery> = train.iter().filter(|q| q.relation == relation).collect();
        let rules = rules_for(self.rules, relation);
        let per_query = parallel::map(&queries, self.config.parallelism, |q| {
            let view = MaskedView::hiding_answers(self.store, &q.subject, relation, &q.truth);
            let session = ProbeSession::new(self.provider, self.config.budget, self.config.cache);
            let qa = qa_scores(&q.subject, relation, &session).unwrap_or_default();
            let rs = rule_scores(&q.subject, relation, &view, &rules, &self.rule_combiner);
            (qa, rs)
        });
        let ranked = |m: &BTreeMap<String, f64>| {
            let mut v: Vec<(String, f64)> = m.iter().map(|(e, s)| (e.clone(), *s)).collect();
            crate::path_fusion::rank_by_score(&mut v, |(e, s)| (e.as_str(), *s));
            v.into_iter().map(|(e, _)| e).collect::<Vec<_>>()
        };
        let mut ap_qa = Vec::new();
        let mut ap_rules = Vec::new();
        let mut samples = Vec::new();
        for (q, (qa, rs)) in queries.iter().zip(&per_query) {
            ap_qa.push(average_precision(&ranked(qa), &q.truth)?);
            ap_rules.push(average_precision(&ranked(rs), &q.truth)?);
            let entities: BTreeSet<&String> = qa.keys().chain(rs.keys()).collect();
            for e in entities {
                samples.push((qa.get(e).copied().unwrap_or(0.0), rs.get(e).copied().unwrap_or(0.0), q.truth.contains(e)));
            }
        }
        let map_qa = mean(&ap_qa)?;
        let map_rules = mean(&ap_rules)?;
        let lambda = compute_lambda(map_qa, map_rules)?;
        let lr_model = match train_ensemble_model(&samples, hp) {
            Ok(m) => Some(m),
            Err(e) => {
                log::warn!("ensemble model for {relation} not trained: {e}");
                None
            }
        };
        Ok(Calibration { lambda, train_map_qa: Some(map_qa), train_map_rules: Some(map_rules), lr_model })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub relations: Vec<String>,
    pub methods: Vec<Method>,
    pub query: QueryConfig,
    pub lr: LrHyperparameters,
    pub include_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub subject: String,
    pub ap: f64,
    pub provider_calls: usize,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCell {
    pub relation: String,
    pub method: Method,
    pub map: f64,
    pub provider_calls: usize,
    pub queries: Vec<QueryResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub lambda: f64,
    pub train_map_qa: Option<f64>,
    pub train_map_rules: Option<f64>,
    pub ensemble_lr_coefficients: Option<Vec<f64>>,
    pub ensemble_lr_intercept: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub calibration: BTreeMap<String, CalibrationSummary>,
    pub cells: Vec<BenchmarkCell>,
}

impl BenchmarkReport {
    pub fn map(&self, relation: &str, method: Method) -> Option<f64> {
        self.cells.iter().find(|c| c.relation == relation && c.method == method).map(|c| c.map)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Evaluates every (relation, method) cell on the test queries. Ensemble
/// calibration uses the training queries. Each test query's truth is hidden
/// from the KB side while it is ranked.
pub fn run_benchmark(
    config: &BenchmarkConfig,
    ranker: &mut Ranker<'_>,
    train: &[EvalQuery],
    test: &[EvalQuery],
) -> Result<BenchmarkReport, EvalError> {
    config.query.validate().map_err(EvalError::Config)?;
    ranker.config = config.query;
    let needs_calibration = config
        .methods
        .iter()
        .any(|m| matches!(m, Method::EnsembleLinear | Method::EnsembleLr));
    let mut calibration = BTreeMap::new();
    for relation in &config.relations {
        if needs_calibration {
            if !train.iter().any(|q| &q.relation == relation) {
                return Err(EvalError::Config(format!("ensemble calibration needs training queries for {relation}")));
            }
            let cal = ranker.calibrate(relation, train, config.lr)?;
            calibration.insert(
                relation.clone(),
                CalibrationSummary {
                    lambda: cal.lambda,
                    train_map_qa: cal.train_map_qa,
                    train_map_rules: cal.train_map_rules,
                    ensemble_lr_coefficients: cal.lr_model.as_ref().map(|m| m.coefficients.clone()),
                    ensemble_lr_intercept: cal.lr_model.as_ref().map(|m| m.intercept),
                },
            );
            ranker.calibration.insert(relation.clone(), cal);
        }
        for &method in &config.methods {
            ranker.check(method, relation)?;
        }
    }

    let mut cells = Vec::new();
    for relation in &config.relations {
        let queries: Vec<&EvalQuery> = test.iter().filter(|q| &q.relation == relation).collect();
        for &method in &config.methods {
            let start = Instant::now();
            let results = parallel::map(&queries, config.query.parallelism, |q| {
                ranker.rank(method, &q.subject, relation, &q.truth).and_then(|r| {
                    Ok(QueryResult {
                        subject: q.subject.clone(),
                        ap: average_precision(&r.entities(), &q.truth)?,
                        provider_calls: r.stats.provider_calls,
                        degraded: r.stats.degraded,
                    })
                })
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
            let aps: Vec<f64> = results.iter().map(|r| r.ap).collect();
            cells.push(BenchmarkCell {
                relation: relation.clone(),
                method,
                map: mean(&aps)?,
                provider_calls: results.iter().map(|r| r.provider_calls).sum(),
                queries: results,
                elapsed_ms: config.include_timing.then(|| start.elapsed().as_millis() as u64),
            });
        }
    }
    Ok(BenchmarkReport {
        config: config.clone(),
        n_train: train.len(),
        n_test: test.len(),
        calibration,
        cells,
    })
}
