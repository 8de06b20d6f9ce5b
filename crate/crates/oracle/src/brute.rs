//! Exhaustive scoring by direct enumeration. No indexes, no filtering, no
//! caching: every step scans the whole world.

use std::collections::{BTreeMap, BTreeSet};

use crate::world::World;

pub const MAX_FACTS: usize = 200;
pub const MAX_QA_ROWS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct Refusal {
    pub facts: usize,
    pub qa_rows: usize,
}

impl std::fmt::Display for Refusal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "world too large for the oracle ({} facts, {} QA rows; limits {MAX_FACTS} and {MAX_QA_ROWS})",
            self.facts, self.qa_rows
        )
    }
}

fn check_size(world: &World) -> Result<(), Refusal> {
    if world.facts.len() > MAX_FACTS || world.qa.len() > MAX_QA_ROWS {
        return Err(Refusal { facts: world.facts.len(), qa_rows: world.qa.len() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Mode {
    Kb,
    Qa,
}

type Step = (String, bool, Mode);

fn signature(steps: &[Step]) -> String {
    let parts: Vec<String> = steps
        .iter()
        .map(|(rel, rev, mode)| {
            let tilde = if *rev { "~" } else { "" };
            let m = if *mode == Mode::Kb { "KB" } else { "QA" };
            format!("{rel}{tilde}:{m}")
        })
        .collect();
    parts.join("/")
}

/// One hop from `from`. Stored facts have confidence 1. QA rows answer
/// forward questions only; repeated rows keep their highest confidence.
fn hop(world: &World, from: &str, (rel, rev, mode): &Step) -> Vec<(String, f64)> {
    match mode {
        Mode::Kb => world
            .facts
            .iter()
            .filter_map(|(s, r, o)| {
                if r != rel {
                    None
                } else if !rev && s == from {
                    Some((o.clone(), 1.0))
                } else if *rev && o == from {
                    Some((s.clone(), 1.0))
                } else {
                    None
                }
            })
            .collect(),
        Mode::Qa if *rev => Vec::new(),
        Mode::Qa => {
            let mut best: BTreeMap<String, f64> = BTreeMap::new();
            for q in &world.qa {
                if q.subject == from && &q.relation == rel {
                    let c = best.entry(q.answer.clone()).or_insert(q.confidence);
                    if q.confidence > *c {
                        *c = q.confidence;
                    }
                }
            }
            best.into_iter().collect()
        }
    }
}

fn path_types(world: &World, relation: &str) -> BTreeMap<String, Vec<Step>> {
    let mut out = BTreeMap::new();
    for mode in [Mode::Kb, Mode::Qa] {
        let steps = vec![(relation.to_string(), false, mode)];
        out.insert(signature(&steps), steps);
    }
    for rule in world.rules.iter().filter(|r| r.head == relation) {
        let mut combos: Vec<Vec<Step>> = vec![Vec::new()];
        for (rel, rev) in &rule.body {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    [Mode::Kb, Mode::Qa].into_iter().map(move |m| {
                        let mut p = prefix.clone();
                        p.push((rel.clone(), *rev, m));
                        p
                    })
                })
                .collect();
        }
        for steps in combos {
            out.insert(signature(&steps), steps);
        }
    }
    out
}

/// Every instance as (signature, answer, product of edge confidences).
pub fn enumerate_instances(world: &World, subject: &str, relation: &str) -> Result<Vec<(String, String, f64)>, Refusal> {
    check_size(world)?;
    let mut out = Vec::new();
    for (sig, steps) in path_types(world, relation) {
        let mut frontier: Vec<(String, f64)> = vec![(subject.to_string(), 1.0)];
        for step in &steps {
            let mut next = Vec::new();
            for (node, score) in &frontier {
                for (to, c) in hop(world, node, step) {
                    next.push((to, score * c));
                }
            }
            frontier = next;
        }
        for (answer, score) in frontier {
            if answer != subject {
                out.push((sig.clone(), answer, score));
            }
        }
    }
    Ok(out)
}

fn ranked(scores: BTreeMap<String, f64>) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = scores.into_iter().collect();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    v
}

/// Score of each candidate: the sum over its instances of path score times
/// the path type's weight (0 when absent). Ranked by score, then name.
pub fn brute_force_score(
    world: &World,
    subject: &str,
    relation: &str,
    weights: &BTreeMap<String, f64>,
) -> Result<Vec<(String, f64)>, Refusal> {
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for (sig, answer, score) in enumerate_instances(world, subject, relation)? {
        *scores.entry(answer).or_insert(0.0) += score * weights.get(&sig).copied().unwrap_or(0.0);
    }
    Ok(ranked(scores))
}

/// The provider's answers to the query itself.
pub fn qa_direct(world: &World, subject: &str, relation: &str) -> Result<Vec<(String, f64)>, Refusal> {
    check_size(world)?;
    let answers = hop(world, subject, &(relation.to_string(), false, Mode::Qa));
    Ok(ranked(answers.into_iter().filter(|(a, _)| a != subject).collect()))
}

/// Rule inference over stored facts: each rule adds its confidence once to
/// every answer it derives.
pub fn rule_sum(world: &World, subject: &str, relation: &str) -> Result<Vec<(String, f64)>, Refusal> {
    check_size(world)?;
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for rule in world.rules.iter().filter(|r| r.head == relation) {
        let mut frontier: BTreeSet<String> = BTreeSet::from([subject.to_string()]);
        for (rel, rev) in &rule.body {
            let step = (rel.clone(), *rev, Mode::Kb);
            frontier = frontier.iter().flat_map(|n| hop(world, n, &step)).map(|(e, _)| e).collect();
        }
        for answer in frontier.into_iter().filter(|a| a != subject) {
            *scores.entry(answer).or_insert(0.0) += rule.confidence;
        }
    }
    Ok(ranked(scores))
}

/// Entity-wise sum of the direct QA and rule-inference scores.
pub fn ensemble_sum(world: &World, subject: &str, relation: &str) -> Result<Vec<(String, f64)>, Refusal> {
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for (e, s) in qa_direct(world, subject, relation)?.into_iter().chain(rule_sum(world, subject, relation)?) {
        *scores.entry(e).or_insert(0.0) += s;
    }
    Ok(ranked(scores))
}

/// Distinct provider questions a query asks when each two-step path type
/// passes on the top `k` first-step results with confidence at least `t`.
pub fn expected_probes(world: &World, subject: &str, relation: &str, t: f64, k: usize) -> Result<BTreeSet<(String, String)>, Refusal> {
    check_size(world)?;
    let mut asked = BTreeSet::new();
    for steps in path_types(world, relation).values() {
        let (rel, rev, mode) = &steps[0];
        if *mode == Mode::Qa && !rev {
            asked.insert((subject.to_string(), rel.clone()));
        }
        if steps.len() == 2 {
            let mut first = hop(world, subject, &steps[0]);
            first.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let (rel2, rev2, mode2) = &steps[1];
            for (x, _) in first.into_iter().filter(|(_, c)| *c >= t).take(k) {
                if *mode2 == Mode::Qa && !rev2 {
                    asked.insert((x, rel2.clone()));
                }
            }
        }
    }
    Ok(asked)
}

/// Standard average precision: mean over truth entities of the precision
/// at the rank where each is found (0 for truths never ranked).
pub fn average_precision(ranking: &[String], truth: &BTreeSet<String>) -> f64 {
    let mut total = 0.0;
    for (i, e) in ranking.iter().enumerate() {
        if truth.contains(e) {
            let hits = ranking[..=i].iter().filter(|x| truth.contains(*x)).count();
            total += hits as f64 / (i + 1) as f64;
        }
    }
    total / truth.len() as f64
}
