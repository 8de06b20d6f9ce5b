//! Path weight learning from training queries.
//!
//! Two estimators are provided: path frequency (the fraction of a path
//! type's occurrences that land on a correct answer), and the coefficients
//! of an L2-regularized logistic regression over per-candidate path counts.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::answer_source::{AnswerProvider, ProbeSession};
use crate::error::TrainError;
use crate::eval_harness::EvalQuery;
use crate::kb_store::{FactStore, MaskedView};
use crate::mkg_builder::{build_graph, QueryConfig};
use crate::parallel;
use crate::path_fusion::{Provenance, WeightKind, WeightTable};
use crate::rule_catalog::Rule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub subject: String,
    pub relation: String,
    pub candidate: String,
    /// Instance count per path signature.
    pub features: BTreeMap<String, usize>,
    pub label: bool,
}

/// Builds one example per candidate answer of every training query. Each
/// query's own truth facts are hidden from the KB while its graph is built.
/// Queries whose graph lost evidence to provider failures are skipped.
pub fn collect_training_examples(
    queries: &[EvalQuery],
    rules: &[Rule],
    store: &FactStore,
    provider: &dyn AnswerProvider,
    config: &QueryConfig,
) -> Vec<TrainingExample> {
    let per_query = parallel::map(queries, config.parallelism, |q| {
        let view = MaskedView::hiding_answers(store, &q.subject, &q.relation, &q.truth);
        let session = ProbeSession::new(provider, config.budget, config.cache);
        let graph = build_graph(&q.subject, &q.relation, rules, &view, &session, config);
        if graph.stats.degraded {
            log::warn!(
                "skipping training query ({}, {}): {:?}",
                q.subject,
                q.relation,
                graph.stats.errors
            );
            return Vec::new();
        }
        graph
            .instances
            .iter()
            .map(|(candidate, instances)| {
                let mut features = BTreeMap::new();
                for inst in instances {
                    *features.entry(inst.path_type.signature()).or_insert(0) += 1;
                }
                TrainingExample {
                    subject: q.subject.clone(),
                    relation: q.relation.clone(),
                    candidate: candidate.clone(),
                    features,
                    label: q.truth.contains(candidate),
                }
            })
            .collect::<Vec<_>>()
    });
    per_query.into_iter().flatten().collect()
}

fn class_counts(examples: &[TrainingExample]) -> (usize, usize) {
    let pos = examples.iter().filter(|e| e.label).count();
    (pos, examples.len() - pos)
}

/// weight(sig) = positive examples containing sig / examples containing sig.
pub fn frequency_weights(relation: &str, examples: &[TrainingExample]) -> WeightTable {
    let mut seen: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for ex in examples {
        for sig in ex.features.keys() {
            let entry = seen.entry(sig).or_default();
            entry.1 += 1;
            if ex.label {
                entry.0 += 1;
            }
        }
    }
    let mut table = WeightTable::with_weights(
        relation,
        WeightKind::Frequency,
        seen.into_iter().map(|(sig, (pos, total))| (sig, pos as f64 / total as f64)),
    );
    let (positives, negatives) = class_counts(examples);
    table.provenance = Provenance {
        kind: WeightKind::Frequency,
        seed: None,
        examples: examples.len(),
        positives,
        negatives,
    };
    table
}

/// Duplicates randomly chosen minority-class items (with replacement)
/// until both classes have the same count. Originals keep their order and
/// the duplicates are appended.
pub fn oversample_by<T: Clone>(items: &[T], label: impl Fn(&T) -> bool, seed: u64) -> Result<Vec<T>, TrainError> {
    let (pos, neg): (Vec<&T>, Vec<&T>) = items.iter().partition(|x| label(x));
    if pos.is_empty() || neg.is_empty() {
        return Err(TrainError::SingleClass { positives: pos.len(), negatives: neg.len() });
    }
    let (minority, deficit) = if pos.len() < neg.len() {
        (&pos, neg.len() - pos.len())
    } else {
        (&neg, pos.len() - neg.len())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = items.to_vec();
    out.extend((0..deficit).map(|_| minority[rng.random_range(0..minority.len())].clone()));
    Ok(out)
}

pub fn oversample(examples: &[TrainingExample], seed: u64) -> Result<Vec<TrainingExample>, TrainError> {
    oversample_by(examples, |e| e.label, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrHyperparameters {
    pub l2: f64,
    pub step_size: f64,
    pub epochs: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LrHyperparameters {
    fn default() -> Self {
        LrHyperparameters { l2: 0.01, step_size: 0.1, epochs: 500, tolerance: 1e-8, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub features: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub hyperparameters: LrHyperparameters,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^a) without overflow.
fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

impl LrModel {
    pub fn zeros(features: Vec<String>, hyperparameters: LrHyperparameters) -> Self {
        let n = features.len();
        LrModel { features, coefficients: vec![0.0; n], intercept: 0.0, hyperparameters }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, TrainError> {
        if x.len() != self.coefficients.len() {
            return Err(TrainError::Dimension { expected: self.coefficients.len(), found: x.len() });
        }
        Ok(sigmoid(dot(&self.coefficients, x) + self.intercept))
    }

    pub fn predict_example(&self, example: &TrainingExample) -> f64 {
        sigmoid(dot(&self.coefficients, &feature_vector(&self.features, example)) + self.intercept)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn feature_vector(order: &[String], example: &TrainingExample) -> Vec<f64> {
    order
        .iter()
        .map(|sig| example.features.get(sig).copied().unwrap_or(0) as f64)
        .collect()
}

/// Mean logistic loss plus `l2 / 2 * |w|^2`; the intercept is unpenalized.
pub fn logistic_loss(x: &[Vec<f64>], y: &[bool], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = x.len().max(1) as f64;
    let data: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| {
            let z = dot(w, xi) + b;
            if yi {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum();
    data / n + 0.5 * l2 * dot(w, w)
}

/// Analytic gradient of [`logistic_loss`] with respect to `(w, b)`.
pub fn logistic_gradient(x: &[Vec<f64>], y: &[bool], w: &[f64], b: f64, l2: f64) -> (Vec<f64>, f64) {
    let n = x.len().max(1) as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let residual = sigmoid(dot(w, xi) + b) - if yi { 1.0 } else { 0.0 };
        for (g, v) in gw.iter_mut().zip(xi) {
            *g += residual * v;
        }
        gb += residual;
    }
    for (g, wi) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * wi;
    }
    (gw, gb / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Loss at initialization followed by the loss after each accepted step.
    pub loss_curve: Vec<f64>,
    pub epochs_run: usize,
    pub final_step_size: f64,
    pub positives: usize,
    pub negatives: usize,
    pub feature_count: usize,
}

/// Full-batch gradient descent from zero. A step that would raise the loss
/// is rejected and the step size halved, so the accepted loss curve never
/// increases. Stops at the epoch limit or when an accepted step improves
/// the loss by less than the tolerance.
pub fn fit_logistic(
    x: &[Vec<f64>],
    y: &[bool],
    features: Vec<String>,
    hp: LrHyperparameters,
) -> Result<(LrModel, TrainingReport), TrainError> {
    if x.is_empty() {
        return Err(TrainError::Empty);
    }
    let positives = y.iter().filter(|&&v| v).count();
    let negatives = y.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(TrainError::SingleClass { positives, negatives });
    }
    if let Some(bad) = x.iter().find(|row| row.len() != features.len()) {
        return Err(TrainError::Dimension { expected: features.len(), found: bad.len() });
    }
    let mut model = LrModel::zeros(features, hp);
    let mut loss = logistic_loss(x, y, &model.coefficients, model.intercept, hp.l2);
    if !loss.is_finite() {
        return Err(TrainError::NonFinite { epoch: 0 });
    }
    let mut curve = vec![loss];
    let mut step = hp.step_size;
    let mut epochs_run = 0;
    for epoch in 1..=hp.epochs {
        epochs_run = epoch;
        let (gw, gb) = logistic_gradient(x, y, &model.coefficients, model.intercept, hp.l2);
        let cand_w: Vec<f64> = model.coefficients.iter().zip(&gw).map(|(w, g)| w - step * g).collect();
        let cand_b = model.intercept - step * gb;
        let cand_loss = logistic_loss(x, y, &cand_w, cand_b, hp.l2);
        if cand_loss.is_nan() {
            return Err(TrainError::NonFinite { epoch });
        }
        if cand_loss > loss {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
            continue;
        }
        let improvement = loss - cand_loss;
        model.coefficients = cand_w;
        model.intercept = cand_b;
        loss = cand_loss;
        curve.push(loss);
        if improvement < hp.tolerance {
            break;
        }
    }
    let report = TrainingReport {
        loss_curve: curve,
        epochs_run,
        final_step_size: step,
        positives,
        negatives,
        feature_count: model.features.len(),
    };
    Ok((model, report))
}

/// Trains on the union of signatures (sorted) using instance counts as features.
pub fn train_lr(examples: &[TrainingExample], hp: LrHyperparameters) -> Result<(LrModel, TrainingReport), TrainError> {
    let order: Vec<String> = examples
        .iter()
        .flat_map(|e| e.features.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let x: Vec<Vec<f64>> = examples.iter().map(|e| feature_vector(&order, e)).collect();
    let y: Vec<bool> = examples.iter().map(|e| e.label).collect();
    fit_logistic(&x, &y, order, hp)
}

/// Uses each coefficient as the weight of its signature; the intercept is dropped.
pub fn importance_weights(relation: &str, model: &LrModel) -> WeightTable {
    let mut table = WeightTable::with_weights(
        relation,
        WeightKind::Importance,
        model.features.iter().cloned().zip(model.coefficients.iter().copied()),
    );
    table.provenance.seed = Some(model.hyperparameters.seed);
    table
}

/// Oversamples, trains, and converts to an importance table. Provenance
/// counts describe the examples before oversampling.
pub fn learn_importance(
    relation: &str,
    examples: &[TrainingExample],
    hp: LrHyperparameters,
) -> Result<(WeightTable, TrainingReport), TrainError> {
    let balanced = oversample(examples, hp.seed)?;
    let (model, report) = train_lr(&balanced, hp)?;
    let mut table = importance_weights(relation, &model);
    let (positives, negatives) = class_counts(examples);
    table.provenance.examples = examples.len();
    table.provenance.positives = positives;
    table.provenance.negatives = negatives;
    Ok((table, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(features: &[(&str, usize)], label: bool) -> TrainingExample {
        TrainingExample {
            subject: "s".into(),
            relation: "r".into(),
            candidate: "c".into(),
            features: features.iter().map(|(s, c)| (s.to_string(), *c)).collect(),
            label,
        }
    }

    #[test]
    fn frequency_ratios() {
        let examples = vec![
            ex(&[("A", 1), ("B", 1)], true),
            ex(&[("A", 2)], true),
            ex(&[("A", 1), ("C", 1)], true),
            ex(&[("A", 1), ("B", 3)], false),
            ex(&[("B", 1)], false),
            ex(&[("D", 1)], true),
        ];
        let t = frequency_weights("r", &examples);
        assert_eq!(t.weight("A"), 0.75);
        assert_eq!(t.weight("B"), 1.0 / 3.0);
        assert_eq!(t.weight("C"), 1.0);
        assert_eq!(t.weight("D"), 1.0);
        assert_eq!(t.weight("unseen"), 0.0);
        let neg = frequency_weights("r", &[ex(&[("N", 1)], false)]);
        assert_eq!(neg.weight("N"), 0.0);
    }

    #[test]
    fn oversampling_balances() {
        let mut examples = vec![ex(&[("A", 1)], true), ex(&[("B", 1)], true)];
        examples.extend((0..10).map(|i| ex(&[("N", i)], false)));
        let out = oversample(&examples, 5).unwrap();
        assert_eq!(out.iter().filter(|e| e.label).count(), 10);
        assert_eq!(out.iter().filter(|e| !e.label).count(), 10);
        assert_eq!(out, oversample(&examples, 5).unwrap());
        let balanced = vec![ex(&[], true), ex(&[], false)];
        assert_eq!(oversample(&balanced, 1).unwrap(), balanced);
        assert!(matches!(oversample(&[ex(&[], true)], 1), Err(TrainError::SingleClass { .. })));
    }

    #[test]
    fn zero_model_predicts_half() {
        let m = LrModel::zeros(vec!["a".into(), "b".into()], LrHyperparameters::default());
        assert_eq!(m.predict_proba(&[3.0, -7.0]).unwrap(), 0.5);
        assert!(m.predict_proba(&[1.0]).is_err());
    }

    #[test]
    fn separable_toy_set() {
        let examples: Vec<_> = (0..6)
            .map(|i| if i % 2 == 0 { ex(&[("A", 1)], true) } else { ex(&[], false) })
            .collect();
        let hp = LrHyperparameters { l2: 0.01, ..Default::default() };
        let (model, report) = train_lr(&examples, hp).unwrap();
        let acc = examples
            .iter()
            .filter(|e| (model.predict_example(e) >= 0.5) == e.label)
            .count();
        assert_eq!(acc, examples.len());
        assert!(report.loss_curve.windows(2).all(|w| w[1] <= w[0]));
        let table = importance_weights("r", &model);
        assert!(table.weight("A") > 0.0);
        assert_eq!(importance_weights("r", &model), table);
    }

    #[test]
    fn non_finite_inputs_fail() {
        let x = vec![vec![f64::NAN], vec![1.0]];
        let err = fit_logistic(&x, &[true, false], vec!["a".into()], LrHyperparameters::default()).unwrap_err();
        assert_eq!(err, TrainError::NonFinite { epoch: 0 });
    }

    #[test]
    fn empty_feature_set() {
        let examples = vec![ex(&[], true), ex(&[], false)];
        let (model, _) = train_lr(&examples, LrHyperparameters::default()).unwrap();
        assert!(importance_weights("r", &model).weights.is_empty());
    }
}
