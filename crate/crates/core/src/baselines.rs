//! Comparison systems: KB-only rule inference and ensemble fusion of the
//! provider's direct answers with rule-inference scores.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::answer_source::ProbeSession;
use crate::error::{BaselineError, ProviderError, TrainError};
use crate::kb_store::FactView;
use crate::path_fusion::rank_by_score;
use crate::rule_catalog::{Literal, Rule};
use crate::weight_learning::{fit_logistic, oversample_by, LrHyperparameters, LrModel};

fn follow<'a>(store: &'a dyn FactView, from: &str, literal: &Literal) -> Vec<&'a str> {
    if literal.reversed {
        store.subjects_of(&literal.relation, from)
    } else {
        store.objects_of(from, &literal.relation)
    }
}

/// Applies every rule with head `relation` to the stored facts. Each rule
/// contributes its confidence once to each answer it derives, however many
/// derivations there are. The subject itself is never an answer.
pub fn infer_by_rules(
    subject: &str,
    relation: &str,
    store: &dyn FactView,
    rules: &[Rule],
) -> BTreeMap<String, Vec<f64>> {
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for rule in rules.iter().filter(|r| r.head == relation) {
        let derived: BTreeSet<&str> = match rule.body.as_slice() {
            [only] => follow(store, subject, only).into_iter().collect(),
            [first, second] => follow(store, subject, first)
                .into_iter()
                .flat_map(|y| follow(store, y, second))
                .collect(),
            _ => BTreeSet::new(),
        };
        for answer in derived.into_iter().filter(|a| *a != subject) {
            out.entry(answer.to_string()).or_default().push(rule.confidence);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RuleCombiner {
    Max,
    Sum,
    /// Probability from a model over (mean confidence, rule count).
    Lr(LrModel),
}

pub fn rule_features(confidences: &[f64]) -> Vec<f64> {
    let n = confidences.len() as f64;
    vec![confidences.iter().sum::<f64>() / n, n]
}

pub fn combine_rule_scores(confidences: &[f64], combiner: &RuleCombiner) -> Result<f64, BaselineError> {
    if confidences.is_empty() {
        return Err(BaselineError::EmptyScores);
    }
    Ok(match combiner {
        RuleCombiner::Max => confidences.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        RuleCombiner::Sum => confidences.iter().sum(),
        RuleCombiner::Lr(model) => model
            .predict_proba(&rule_features(confidences))
            .map_err(|_| BaselineError::MissingModel("rule combiner model expects 2 features"))?,
    })
}

/// Fits the rule-combination model on labelled per-answer confidence lists.
pub fn train_rule_combiner(
    samples: &[(Vec<f64>, bool)],
    hp: LrHyperparameters,
) -> Result<LrModel, TrainError> {
    let usable: Vec<&(Vec<f64>, bool)> = samples.iter().filter(|(c, _)| !c.is_empty()).collect();
    let balanced = oversample_by(&usable, |s| s.1, hp.seed)?;
    let x: Vec<Vec<f64>> = balanced.iter().map(|(c, _)| rule_features(c)).collect();
    let y: Vec<bool> = balanced.iter().map(|(_, l)| *l).collect();
    let (model, _) = fit_logistic(&x, &y, vec!["mean_confidence".into(), "rule_count".into()], hp)?;
    Ok(model)
}

/// Combined rule-inference score per answer.
pub fn rule_scores(
    subject: &str,
    relation: &str,
    store: &dyn FactView,
    rules: &[Rule],
    combiner: &RuleCombiner,
) -> BTreeMap<String, f64> {
    infer_by_rules(subject, relation, store, rules)
        .into_iter()
        .filter_map(|(e, confs)| combine_rule_scores(&confs, combiner).ok().map(|s| (e, s)))
        .collect()
}

/// The provider's direct answers to `<subject, relation, ?>`.
pub fn qa_scores(
    subject: &str,
    relation: &str,
    session: &ProbeSession<'_>,
) -> Result<BTreeMap<String, f64>, ProviderError> {
    Ok(session
        .ask(subject, relation)?
        .into_iter()
        .filter(|a| a.entity != subject)
        .map(|a| (a.entity, a.confidence))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMethod {
    Linear,
    Max,
    Sum,
    Lr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleInputs {
    pub qa_scores: BTreeMap<String, f64>,
    pub rule_scores: BTreeMap<String, f64>,
    pub lambda: f64,
    /// Model over `(score_q, score_r)` for [`FusionMethod::Lr`].
    pub lr_model: Option<LrModel>,
}

impl EnsembleInputs {
    pub fn new(qa_scores: BTreeMap<String, f64>, rule_scores: BTreeMap<String, f64>) -> Self {
        EnsembleInputs { qa_scores, rule_scores, lambda: 0.5, lr_model: None }
    }
}

/// Fuses the two score maps per entity (missing scores count as 0) and
/// ranks by descending fused score, then ascending entity.
pub fn ensemble_fuse(inputs: &EnsembleInputs, method: FusionMethod) -> Result<Vec<(String, f64)>, BaselineError> {
    if !(0.0..=1.0).contains(&inputs.lambda) {
        return Err(BaselineError::LambdaRange(inputs.lambda));
    }
    let model = match method {
        FusionMethod::Lr => Some(
            inputs
                .lr_model
                .as_ref()
                .ok_or(BaselineError::MissingModel("ensemble-lr requires a trained model"))?,
        ),
        _ => None,
    };
    let entities: BTreeSet<&String> = inputs.qa_scores.keys().chain(inputs.rule_scores.keys()).collect();
    let mut out = Vec::with_capacity(entities.len());
    for e in entities {
        let q = inputs.qa_scores.get(e).copied().unwrap_or(0.0);
        let r = inputs.rule_scores.get(e).copied().unwrap_or(0.0);
        let fused = match method {
            FusionMethod::Linear => inputs.lambda * q + (1.0 - inputs.lambda) * r,
            FusionMethod::Max => q.max(r),
            FusionMethod::Sum => q + r,
            FusionMethod::Lr => model
                .expect("checked above")
                .predict_proba(&[q, r])
                .map_err(|_| BaselineError::MissingModel("ensemble model expects 2 features"))?,
        };
        out.push((e.clone(), fused));
    }
    rank_by_score(&mut out, |(e, s)| (e.as_str(), *s));
    Ok(out)
}

/// λ = MAP_qa / (MAP_qa + MAP_rule).
pub fn compute_lambda(map_qa: f64, map_rule: f64) -> Result<f64, BaselineError> {
    if map_qa < 0.0 || map_rule < 0.0 {
        return Err(BaselineError::NegativePerformance);
    }
    if map_qa + map_rule == 0.0 {
        return Err(BaselineError::ZeroPerformance);
    }
    Ok(map_qa / (map_qa + map_rule))
}

/// Fits the ensemble model on `(score_q, score_r, label)` samples.
pub fn train_ensemble_model(samples: &[(f64, f64, bool)], hp: LrHyperparameters) -> Result<LrModel, TrainError> {
    let balanced = oversample_by(samples, |s| s.2, hp.seed)?;
    let x: Vec<Vec<f64>> = balanced.iter().map(|(q, r, _)| vec![*q, *r]).collect();
    let y: Vec<bool> = balanced.iter().map(|s| s.2).collect();
    let (model, _) = fit_logistic(&x, &y, vec!["score_q".into(), "score_r".into()], hp)?;
    Ok(model)
}
