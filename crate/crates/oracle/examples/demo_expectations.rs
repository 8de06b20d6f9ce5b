//! Writes `expectations.json` for the demo world: oracle rankings of the
//! Marvin_Minsky birthplace query under each shipped weight file.
//!
//!     cargo run -p kbc-oracle --example demo_expectations -- fixtures/demo

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use kbc_oracle::brute::qa_direct;
use kbc_oracle::{brute_force_score, World};
use serde_json::json;

fn weights(text: &str) -> BTreeMap<String, f64> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[1].to_string(), f[2].parse().unwrap())
        })
        .collect()
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures/demo".into()));
    let mut world = World::load_dir(&dir).unwrap();
    // the demo config drops rules below confidence 0.1 or support 10
    world.rules.retain(|r| r.confidence >= 0.1 && r.support >= 10);
    let (s, r) = ("Marvin_Minsky", "wasBornIn");
    let rank = |file: &str| {
        let w = weights(&fs::read_to_string(dir.join(file)).unwrap());
        brute_force_score(&world, s, r, &w).unwrap()
    };
    let doc = json!({
        "query": { "subject": s, "relation": r },
        "rankings": {
            "webqa": qa_direct(&world, s, r).unwrap(),
            "mpf-frequency": rank("weights.frequency.tsv"),
            "mpf-importance": rank("weights.importance.tsv"),
        },
        "max_fan_out": world.max_fan_out(),
    });
    fs::write(dir.join("expectations.json"), serde_json::to_string_pretty(&doc).unwrap() + "\n").unwrap();
}
