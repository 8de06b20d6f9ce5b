//! Per-query multimodal knowledge graph construction.
//!
//! Every rule for the query relation is expanded into path types, one per
//! combination of edge modalities (KB or QA), plus the two direct paths on
//! the query relation itself. Traversal runs in two phases: all first
//! edges from the query subject, then all second edges from the
//! intermediates that survive the `t`/`k` filter. Within a phase, QA probes
//! run concurrently; the phase boundary is the only synchronization point,
//! so a query with two-edge rules costs about two provider round trips.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::answer_source::{ProbeSession, DEFAULT_BUDGET};
use crate::error::ProviderError;
use crate::kb_store::FactView;
use crate::parallel;
use crate::rule_catalog::{Literal, Rule};

pub const DEFAULT_T: f64 = 0.3;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_PARALLELISM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "KB")]
    Kb,
    #[serde(rename = "QA")]
    Qa,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Kb => "KB",
            Modality::Qa => "QA",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathStep {
    pub literal: Literal,
    pub modality: Modality,
}

impl PathStep {
    pub fn new(literal: Literal, modality: Modality) -> Self {
        PathStep { literal, modality }
    }
}

impl fmt::Display for PathStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.literal, self.modality)
    }
}

/// A sequence of one or two typed steps. Rendered as its signature, e.g.
/// `hasChild~:KB/wasBornIn:QA`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathType {
    pub steps: Vec<PathStep>,
}

impl PathType {
    pub fn new(steps: Vec<PathStep>) -> Self {
        debug_assert!((1..=2).contains(&steps.len()));
        PathType { steps }
    }

    pub fn direct(relation: &str, modality: Modality) -> Self {
        PathType::new(vec![PathStep::new(Literal::forward(relation), modality)])
    }

    pub fn signature(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PathType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{step}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureError(pub String);

impl fmt::Display for SignatureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid path signature {:?}", self.0)
    }
}

impl std::error::Error for SignatureError {}

impl FromStr for PathType {
    type Err = SignatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SignatureError(s.to_string());
        let steps = s
            .split('/')
            .map(|tok| {
                let (lit, modality) = tok.rsplit_once(':').ok_or_else(bad)?;
                let modality = match modality {
                    "KB" => Modality::Kb,
                    "QA" => Modality::Qa,
                    _ => return Err(bad()),
                };
                let literal = Literal::parse(lit).ok_or_else(bad)?;
                Ok(PathStep::new(literal, modality))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if !(1..=2).contains(&steps.len()) {
            return Err(bad());
        }
        Ok(PathType { steps })
    }
}

/// One concrete traversal: `nodes[0]` is the query subject and the last
/// node is the candidate answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathInstance {
    pub path_type: PathType,
    pub nodes: Vec<String>,
    pub edge_confidences: Vec<f64>,
}

impl PathInstance {
    pub fn answer(&self) -> &str {
        self.nodes.last().map(String::as_str).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryConfig {
    /// Minimum confidence of a first-step intermediate.
    pub t: f64,
    /// Maximum intermediates passed on per path type.
    pub k: usize,
    pub parallelism: usize,
    pub budget: usize,
    pub cache: bool,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            t: DEFAULT_T,
            k: DEFAULT_K,
            parallelism: DEFAULT_PARALLELISM,
            budget: DEFAULT_BUDGET,
            cache: true,
        }
    }
}

impl QueryConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.t) {
            return Err(format!("t must be in [0, 1], got {}", self.t));
        }
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        if self.budget == 0 {
            return Err("provider budget must be at least 1".into());
        }
        if self.parallelism == 0 {
            return Err("parallelism must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub provider_calls: usize,
    /// Intermediates passed to the second step, per two-step path type.
    pub kept_intermediates: BTreeMap<String, usize>,
    /// First-step results dropped by the `t` threshold or the `k` limit.
    pub filtered_intermediates: usize,
    /// Path types that contributed nothing because a probe failed.
    pub failed_path_types: Vec<String>,
    pub errors: Vec<String>,
    /// Some evidence is missing (budget exhausted or provider failure).
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalKnowledgeGraph {
    pub subject: String,
    pub relation: String,
    pub instances: BTreeMap<String, Vec<PathInstance>>,
    pub stats: GraphStats,
}

impl MultimodalKnowledgeGraph {
    pub fn instance_count(&self) -> usize {
        self.instances.values().map(Vec::len).sum()
    }

    pub fn all_instances(&self) -> impl Iterator<Item = &PathInstance> {
        self.instances.values().flatten()
    }
}

/// Path types for `relation`: the two direct paths, then every modality
/// combination of each rule body, deduplicated in first-seen order.
pub fn expand_path_types(relation: &str, rules: &[Rule]) -> Vec<PathType> {
    const MODES: [Modality; 2] = [Modality::Kb, Modality::Qa];
    let mut out = vec![PathType::direct(relation, Modality::Kb), PathType::direct(relation, Modality::Qa)];
    let mut seen: BTreeSet<PathType> = out.iter().cloned().collect();
    for rule in rules.iter().filter(|r| r.head == relation) {
        let combos: Vec<Vec<Modality>> = match rule.body.len() {
            1 => MODES.iter().map(|&m| vec![m]).collect(),
            2 => MODES.iter().flat_map(|&a| MODES.iter().map(move |&b| vec![a, b])).collect(),
            _ => continue,
        };
        for combo in combos {
            let steps = rule
                .body
                .iter()
                .zip(combo)
                .map(|(lit, m)| PathStep::new(lit.clone(), m))
                .collect();
            let pt = PathType::new(steps);
            if seen.insert(pt.clone()) {
                out.push(pt);
            }
        }
    }
    out
}

fn sort_candidates(items: &mut [(String, f64)]) {
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Follows one edge from `subject`. KB edges have confidence 1.0; forward QA
/// edges ask the provider; reversed QA edges have no probe and yield nothing.
pub fn traverse_edge(
    subject: &str,
    literal: &Literal,
    modality: Modality,
    store: &dyn FactView,
    session: &ProbeSession<'_>,
) -> Result<Vec<(String, f64)>, ProviderError> {
    let mut out: Vec<(String, f64)> = match (modality, literal.reversed) {
        (Modality::Kb, _) => kb_edge(store, subject, literal),
        (Modality::Qa, true) => Vec::new(),
        (Modality::Qa, false) => session
            .ask(subject, &literal.relation)?
            .into_iter()
            .map(|a| (a.entity, a.confidence))
            .collect(),
    };
    sort_candidates(&mut out);
    Ok(out)
}

fn kb_edge(store: &dyn FactView, subject: &str, literal: &Literal) -> Vec<(String, f64)> {
    let found = if literal.reversed {
        store.subjects_of(&literal.relation, subject)
    } else {
        store.objects_of(subject, &literal.relation)
    };
    found.into_iter().map(|e| (e.to_string(), 1.0)).collect()
}

/// Drops candidates below `t`, then keeps the first `k`. Input is expected
/// sorted by descending confidence.
pub fn filter_intermediates(candidates: &[(String, f64)], t: f64, k: usize) -> Vec<(String, f64)> {
    candidates.iter().filter(|(_, c)| *c >= t).take(k).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct EdgeKey {
    from: String,
    step: PathStep,
}

type EdgeResults = HashMap<EdgeKey, Result<Vec<(String, f64)>, ProviderError>>;

/// Resolves a batch of edges. Probes not already cached are admitted in
/// sorted order while budget lasts, so which probes run never depends on
/// thread scheduling. Admitted probes run concurrently.
fn resolve_edges(
    mut keys: Vec<EdgeKey>,
    store: &dyn FactView,
    session: &ProbeSession<'_>,
    parallelism: usize,
) -> EdgeResults {
    keys.sort();
    keys.dedup();
    let mut results = EdgeResults::with_capacity(keys.len());
    let mut probes = Vec::new();
    let mut budget = session.remaining();
    for key in keys {
        let needs_call = key.step.modality == Modality::Qa && !key.step.literal.reversed;
        if !needs_call {
            let r = traverse_edge(&key.from, &key.step.literal, key.step.modality, store, session);
            results.insert(key, r);
        } else if session.is_cached(&key.from, &key.step.literal.relation) {
            probes.push(key);
        } else if budget > 0 {
            budget -= 1;
            probes.push(key);
        } else {
            session.mark_exhausted();
            let err = ProviderError::BudgetExhausted {
                subject: key.from.clone(),
                relation: key.step.literal.relation.clone(),
            };
            results.insert(key, Err(err));
        }
    }
    let answered = parallel::map(&probes, parallelism, |key| {
        traverse_edge(&key.from, &key.step.literal, key.step.modality, store, session)
    });
    results.extend(probes.into_iter().zip(answered));
    results
}

/// Builds the multimodal knowledge graph for `<subject, relation, ?>`.
pub fn build_graph(
    subject: &str,
    relation: &str,
    rules: &[Rule],
    store: &dyn FactView,
    session: &ProbeSession<'_>,
    config: &QueryConfig,
) -> MultimodalKnowledgeGraph {
    let path_types = expand_path_types(relation, rules);
    let mut stats = GraphStats::default();
    let calls_before = session.calls();
    let parallelism = config.parallelism.max(1);

    let first_keys = path_types
        .iter()
        .map(|pt| EdgeKey { from: subject.to_string(), step: pt.steps[0].clone() })
        .collect();
    let first = resolve_edges(first_keys, store, session, parallelism);

    let mut failed: BTreeSet<String> = BTreeSet::new();
    let mut errors: BTreeSet<String> = BTreeSet::new();
    let mut record_failure = |pt: &PathType, err: &ProviderError, failed: &mut BTreeSet<String>| {
        failed.insert(pt.signature());
        errors.insert(err.to_string());
    };

    // (path type, intermediates) for two-step types
    let mut pending: Vec<(&PathType, Vec<(String, f64)>)> = Vec::new();
    let mut raw: Vec<PathInstance> = Vec::new();
    for pt in &path_types {
        let key = EdgeKey { from: subject.to_string(), step: pt.steps[0].clone() };
        let hop = match &first[&key] {
            Ok(hop) => hop,
            Err(e) => {
                record_failure(pt, e, &mut failed);
                continue;
            }
        };
        if pt.steps.len() == 1 {
            raw.extend(hop.iter().map(|(e, c)| PathInstance {
                path_type: pt.clone(),
                nodes: vec![subject.to_string(), e.clone()],
                edge_confidences: vec![*c],
            }));
        } else {
            let kept = filter_intermediates(hop, config.t, config.k);
            stats.filtered_intermediates += hop.len() - kept.len();
            stats.kept_intermediates.insert(pt.signature(), kept.len());
            pending.push((pt, kept));
        }
    }

    let second_keys = pending
        .iter()
        .flat_map(|(pt, kept)| {
            kept.iter().map(|(x, _)| EdgeKey { from: x.clone(), step: pt.steps[1].clone() })
        })
        .collect();
    let second = resolve_edges(second_keys, store, session, parallelism);

    'types: for (pt, kept) in &pending {
        let mut local = Vec::new();
        for (x, c1) in kept {
            let key = EdgeKey { from: x.clone(), step: pt.steps[1].clone() };
            match &second[&key] {
                Ok(hop) => local.extend(hop.iter().map(|(y, c2)| PathInstance {
                    path_type: (*pt).clone(),
                    nodes: vec![subject.to_string(), x.clone(), y.clone()],
                    edge_confidences: vec![*c1, *c2],
                })),
                Err(e) => {
                    record_failure(pt, e, &mut failed);
                    continue 'types;
                }
            }
        }
        raw.extend(local);
    }

    let mut merged: BTreeMap<(String, Vec<String>), PathInstance> = BTreeMap::new();
    for inst in raw.into_iter().filter(|i| i.answer() != subject) {
        match merged.entry((inst.path_type.signature(), inst.nodes.clone())) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(inst);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                for (a, b) in o.get_mut().edge_confidences.iter_mut().zip(&inst.edge_confidences) {
                    *a = a.max(*b);
                }
            }
        }
    }
    let mut instances: BTreeMap<String, Vec<PathInstance>> = BTreeMap::new();
    for inst in merged.into_values() {
        instances.entry(inst.answer().to_string()).or_default().push(inst);
    }

    stats.provider_calls = session.calls() - calls_before;
    stats.degraded = !failed.is_empty() || session.exhausted();
    stats.failed_path_types = failed.into_iter().collect();
    stats.errors = errors.into_iter().collect();
    MultimodalKnowledgeGraph {
        subject: subject.to_string(),
        relation: relation.to_string(),
        instances,
        stats,
    }
}
