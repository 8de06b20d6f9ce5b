//! Recomputes the expected benchmark MAPs by brute force and writes
//! `expectations.json` next to the world.
//!
//!     cargo run -p kbc-oracle --example bench_expectations -- fixtures/bench

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;

use kbc_oracle::brute::{ensemble_sum, qa_direct, rule_sum};
use kbc_oracle::{average_precision, brute_force_score, World};
use serde_json::json;

fn read_weights(text: &str) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        out.entry(f[0].into()).or_default().insert(f[1].into(), f[2].parse().unwrap());
    }
    out
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures/bench".into()));
    let world = World::load_dir(&dir).unwrap();
    let read = |name: &str| fs::read_to_string(dir.join(name)).unwrap();
    let frequency = read_weights(&read("weights.frequency.tsv"));
    let importance = read_weights(&read("weights.importance.tsv"));
    let test: Vec<(String, String, BTreeSet<String>)> = read("test.tsv")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].into(), f[1].into(), f[2].split(',').map(String::from).collect())
        })
        .collect();

    let mut aps: BTreeMap<(String, &str), Vec<f64>> = BTreeMap::new();
    for (subject, relation, truth) in &test {
        let local = world.neighbourhood(subject, relation).masked(subject, relation);
        let names = |r: Vec<(String, f64)>| r.into_iter().map(|(e, _)| e).collect::<Vec<_>>();
        let empty = BTreeMap::new();
        let rankings = [
            ("webqa", names(qa_direct(&local, subject, relation).unwrap())),
            ("rules", names(rule_sum(&local, subject, relation).unwrap())),
            ("ensemble-sum", names(ensemble_sum(&local, subject, relation).unwrap())),
            (
                "mpf-frequency",
                names(brute_force_score(&local, subject, relation, frequency.get(relation).unwrap_or(&empty)).unwrap()),
            ),
            (
                "mpf-importance",
                names(brute_force_score(&local, subject, relation, importance.get(relation).unwrap_or(&empty)).unwrap()),
            ),
        ];
        for (method, ranking) in rankings {
            aps.entry((relation.clone(), method)).or_default().push(average_precision(&ranking, truth));
        }
    }
    let mut doc: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for ((relation, method), v) in &aps {
        doc.entry(relation.clone()).or_default().insert(method.to_string(), v.iter().sum::<f64>() / v.len() as f64);
    }
    let body = json!({
        "max_fan_out": world.max_fan_out(),
        "test_queries": test.len(),
        "map": doc,
    });
    fs::write(dir.join("expectations.json"), serde_json::to_string_pretty(&body).unwrap() + "\n").unwrap();
    for (relation, maps) in &doc {
        for (m, v) in maps {
            eprintln!("{relation}\t{m}\t{v:.4}");
        }
    }
}
