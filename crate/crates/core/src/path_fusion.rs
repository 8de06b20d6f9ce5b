//! Candidate scoring over a multimodal knowledge graph.
//!
//! A candidate's score is the sum, over every path instance ending at it,
//! of the instance's path score times the learned weight of its path type.
//! The path score is the product of the instance's edge confidences.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::answer_source::{AnswerProvider, ProbeSession};
use crate::error::IngestError;
use crate::kb_store::FactView;
use crate::mkg_builder::{build_graph, GraphStats, MultimodalKnowledgeGraph, PathInstance, PathType, QueryConfig};
use crate::rule_catalog::Rule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Frequency,
    Importance,
}

impl WeightKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightKind::Frequency => "frequency",
            WeightKind::Importance => "importance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: WeightKind,
    pub seed: Option<u64>,
    pub examples: usize,
    pub positives: usize,
    pub negatives: usize,
}

impl Provenance {
    pub fn new(kind: WeightKind) -> Self {
        Provenance { kind, seed: None, examples: 0, positives: 0, negatives: 0 }
    }
}

/// Learned weights for the path types of one relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub relation: String,
    pub weights: BTreeMap<String, f64>,
    /// Used for signatures absent from `weights`.
    pub default_weight: f64,
    pub provenance: Provenance,
}

impl WeightTable {
    pub fn new(relation: impl Into<String>, kind: WeightKind) -> Self {
        WeightTable {
            relation: relation.into(),
            weights: BTreeMap::new(),
            default_weight: 0.0,
            provenance: Provenance::new(kind),
        }
    }

    pub fn with_weights<I, S>(relation: impl Into<String>, kind: WeightKind, weights: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut table = WeightTable::new(relation, kind);
        table.weights = weights.into_iter().map(|(s, w)| (s.into(), w)).collect();
        table
    }

    pub fn weight(&self, signature: &str) -> f64 {
        self.weights.get(signature).copied().unwrap_or(self.default_weight)
    }

    /// Every weight multiplied by `factor`, including the default.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.default_weight *= factor;
        for w in out.weights.values_mut() {
            *w *= factor;
        }
        out
    }
}

/// Formats a weight with 12 significant digits, printed in the shortest
/// form that parses back to the rounded value.
pub fn format_weight(w: f64) -> String {
    let rounded: f64 = format!("{w:.11e}").parse().unwrap_or(w);
    if rounded == 0.0 {
        return "0".to_string();
    }
    rounded.to_string()
}

/// Weight tables keyed by relation, as stored in one weight file.
pub type WeightSet = BTreeMap<String, WeightTable>;

/// Renders weight tables as `relation<TAB>signature<TAB>weight` lines, each
/// table preceded by a `#@` provenance line.
pub fn write_weights(tables: &WeightSet) -> String {
    let mut out = String::new();
    for table in tables.values() {
        let p = &table.provenance;
        let _ = write!(out, "#@ relation={} kind={} examples={} positives={} negatives={}",
            table.relation, p.kind.as_str(), p.examples, p.positives, p.negatives);
        if let Some(seed) = p.seed {
            let _ = write!(out, " seed={seed}");
        }
        out.push('\n');
        for (sig, w) in &table.weights {
            let _ = writeln!(out, "{}\t{}\t{}", table.relation, sig, format_weight(*w));
        }
    }
    out
}

pub fn read_weights<R: BufRead>(reader: R) -> Result<WeightSet, IngestError> {
    let mut tables = WeightSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if let Some(meta) = line.strip_prefix("#@") {
            let fields: BTreeMap<&str, &str> = meta.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
            let Some(relation) = fields.get("relation") else { continue };
            let kind = match fields.get("kind").copied() {
                Some("importance") => WeightKind::Importance,
                _ => WeightKind::Frequency,
            };
            let num = |key: &str| fields.get(key).and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
            let table = tables.entry(relation.to_string()).or_insert_with(|| WeightTable::new(*relation, kind));
            table.provenance = Provenance {
                kind,
                seed: fields.get("seed").and_then(|v| v.parse().ok()),
                examples: num("examples"),
                positives: num("positives"),
                negatives: num("negatives"),
            };
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(IngestError::FieldCount { source_name: "weights", line: lineno, expected: 3, found: fields.len() });
        }
        if fields[1].parse::<PathType>().is_err() {
            return Err(IngestError::Invalid {
                source_name: "weights",
                line: lineno,
                message: format!("invalid path signature {:?}", fields[1]),
            });
        }
        let w: f64 = fields[2]
            .parse()
            .ok()
            .filter(|w: &f64| w.is_finite())
            .ok_or_else(|| IngestError::Number { source_name: "weights", line: lineno, value: fields[2].to_string() })?;
        tables
            .entry(fields[0].to_string())
            .or_insert_with(|| WeightTable::new(fields[0], WeightKind::Frequency))
            .weights
            .insert(fields[1].to_string(), w);
    }
    Ok(tables)
}

pub fn read_weights_str(text: &str) -> Result<WeightSet, IngestError> {
    read_weights(text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathContribution {
    pub signature: String,
    pub score: f64,
    pub weight: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredAnswer {
    pub entity: String,
    pub score: f64,
    pub paths: Vec<PathContribution>,
}

pub fn path_score(instance: &PathInstance) -> f64 {
    instance.edge_confidences.iter().product()
}

/// Sorts by descending score, then ascending entity.
pub fn rank_by_score<T>(items: &mut [T], key: impl Fn(&T) -> (&str, f64)) {
    items.sort_by(|a, b| {
        let (ea, sa) = key(a);
        let (eb, sb) = key(b);
        sb.total_cmp(&sa).then_with(|| ea.cmp(eb))
    });
}

pub fn score_answers(graph: &MultimodalKnowledgeGraph, weights: &WeightTable) -> Vec<ScoredAnswer> {
    let mut out: Vec<ScoredAnswer> = graph
        .instances
        .iter()
        .filter(|(_, instances)| !instances.is_empty())
        .map(|(entity, instances)| {
            let paths: Vec<PathContribution> = instances
                .iter()
                .map(|inst| {
                    let signature = inst.path_type.signature();
                    let score = path_score(inst);
                    let weight = weights.weight(&signature);
                    PathContribution { signature, score, weight, contribution: score * weight }
                })
                .collect();
            let score = paths.iter().map(|p| p.contribution).sum();
            ScoredAnswer { entity: entity.clone(), score, paths }
        })
        .collect();
    rank_by_score(&mut out, |a| (a.entity.as_str(), a.score));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub answers: Vec<ScoredAnswer>,
    pub stats: GraphStats,
    pub elapsed_ms: u64,
}

/// Builds the graph for `<subject, relation, ?>` and ranks its candidates.
pub fn complete(
    subject: &str,
    relation: &str,
    rules: &[Rule],
    store: &dyn FactView,
    provider: &dyn AnswerProvider,
    weights: &WeightTable,
    config: &QueryConfig,
) -> Completion {
    let start = Instant::now();
    let session = ProbeSession::new(provider, config.budget, config.cache);
    let graph = build_graph(subject, relation, rules, store, &session, config);
    let answers = score_answers(&graph, weights);
    Completion { answers, stats: graph.stats, elapsed_ms: start.elapsed().as_millis() as u64 }
}
