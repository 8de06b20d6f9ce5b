//! Writes the constructed benchmark world (kb.tsv, rules.tsv, qa.tsv).
//!
//!     cargo run -p kbc-oracle --example gen_bench_world -- fixtures/bench
//!
//! Families of two generations. A child is usually born where its parent
//! was, spouses often share a birthplace, people often die where they were
//! born, and where someone lives says little. Some parents have no stored
//! birthplace but the QA fixture knows it, noisily.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;
const PARENTS: usize = 40;
const CHILDREN_PER_PARENT: std::ops::RangeInclusive<usize> = 2..=4;
const CITIES: [&str; 12] = [
    "Amsterdam", "Berlin", "Boston", "Chicago", "Dublin", "Lisbon", "Madrid", "Oslo", "Paris", "Prague",
    "Rome", "Vienna",
];
const P_CHILD_FOLLOWS_PARENT: f64 = 0.7;
const P_SPOUSE_SAME_CITY: f64 = 0.5;
const P_DIED_AT_BIRTHPLACE: f64 = 0.55;
const P_PARENT_BIRTHPLACE_STORED: f64 = 0.6;
const P_QA_KNOWS_TRUTH: f64 = 0.75;

fn other_city(rng: &mut ChaCha8Rng, not: &str) -> &'static str {
    loop {
        let c = *CITIES.choose(rng).unwrap();
        if c != not {
            return c;
        }
    }
}

fn qa_rows(rng: &mut ChaCha8Rng, person: &str, truth: &str, out: &mut Vec<String>) {
    if rng.random_bool(P_QA_KNOWS_TRUTH) {
        let c = rng.random_range(40..=90) as f64 / 100.0;
        out.push(format!("{person}\twasBornIn\t{truth}\t{c}"));
    }
    for _ in 0..rng.random_range(1..=2) {
        let wrong = other_city(rng, truth);
        let c = rng.random_range(20..=80) as f64 / 100.0;
        out.push(format!("{person}\twasBornIn\t{wrong}\t{c}"));
    }
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures/bench".into()));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut kb: Vec<String> = Vec::new();
    let mut qa: Vec<String> = Vec::new();
    let mut born: BTreeMap<String, &'static str> = BTreeMap::new();
    let mut children: Vec<String> = Vec::new();

    for p in 0..PARENTS {
        let parent = format!("Parent_{p:02}");
        let city = *CITIES.choose(&mut rng).unwrap();
        born.insert(parent.clone(), city);
        if rng.random_bool(P_PARENT_BIRTHPLACE_STORED) {
            kb.push(format!("{parent}\twasBornIn\t{city}"));
        }
        qa_rows(&mut rng, &parent, city, &mut qa);
        for c in 0..rng.random_range(CHILDREN_PER_PARENT) {
            let child = format!("Child_{p:02}_{c}");
            let city = if rng.random_bool(P_CHILD_FOLLOWS_PARENT) { born[&parent] } else { other_city(&mut rng, born[&parent]) };
            born.insert(child.clone(), city);
            kb.push(format!("{parent}\thasChild\t{child}"));
            kb.push(format!("{child}\twasBornIn\t{city}"));
            qa_rows(&mut rng, &child, city, &mut qa);
            children.push(child);
        }
    }

    // marriages between children of different parents
    let mut unmarried = children.clone();
    while unmarried.len() >= 2 {
        let a = unmarried.swap_remove(rng.random_range(0..unmarried.len()));
        if !rng.random_bool(0.7) {
            continue;
        }
        let want_same = rng.random_bool(P_SPOUSE_SAME_CITY);
        let pick = unmarried
            .iter()
            .position(|b| b[..8] != a[..8] && (born[b] == born[&a]) == want_same)
            .or_else(|| unmarried.iter().position(|b| b[..8] != a[..8]));
        if let Some(i) = pick {
            let b = unmarried.swap_remove(i);
            kb.push(format!("{a}\tisMarriedTo\t{b}"));
            kb.push(format!("{b}\tisMarriedTo\t{a}"));
        }
    }

    for (person, city) in &born {
        let died = if rng.random_bool(P_DIED_AT_BIRTHPLACE) { *city } else { other_city(&mut rng, city) };
        if rng.random_bool(0.8) {
            kb.push(format!("{person}\tdiedIn\t{died}"));
        }
        let lives = other_city(&mut rng, city);
        kb.push(format!("{person}\tlivesIn\t{lives}"));
    }

    kb.sort();
    qa.sort();
    let rules = "\
# head\tbody\tconfidence\tsupport
wasBornIn\thasChild~,wasBornIn\t0.5\t80
wasBornIn\tisMarriedTo,wasBornIn\t0.4\t120
wasBornIn\tdiedIn\t0.3\t500
wasBornIn\tlivesIn\t0.35\t60
";
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("kb.tsv"), kb.join("\n") + "\n").unwrap();
    fs::write(dir.join("qa.tsv"), qa.join("\n") + "\n").unwrap();
    fs::write(dir.join("rules.tsv"), rules).unwrap();
    eprintln!("{} facts, {} QA rows, {} people", kb.len(), qa.len(), born.len());
}
