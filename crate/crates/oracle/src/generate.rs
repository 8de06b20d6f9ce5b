//! Seeded world generators.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::world::{QaRow, World, WorldRule};

/// A random small world with a query and a weight for every path type.
#[derive(Debug, Clone)]
pub struct RandomCase {
    pub world: World,
    pub subject: String,
    pub relation: String,
    pub weights: BTreeMap<String, f64>,
}

const ENTITIES: usize = 6;
const RELATIONS: [&str; 3] = ["r0", "r1", "r2"];

fn entity(rng: &mut ChaCha8Rng) -> String {
    format!("e{}", rng.random_range(0..ENTITIES))
}

fn relation(rng: &mut ChaCha8Rng) -> String {
    RELATIONS[rng.random_range(0..RELATIONS.len())].to_string()
}

/// Between 8 and 20 facts, at most 2 rules for `r0` and 5 QA rows over 6 entities.
pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut world = World::default();
    let subject = entity(&mut rng);
    for _ in 0..rng.random_range(8..=20) {
        let fact = (entity(&mut rng), relation(&mut rng), entity(&mut rng));
        world.facts.insert(fact);
    }
    for _ in 0..rng.random_range(0..=2) {
        let len = rng.random_range(1..=2);
        let body = (0..len).map(|_| (relation(&mut rng), rng.random_bool(0.4))).collect();
        let confidence = rng.random_range(1..=100) as f64 / 100.0;
        world.rules.push(WorldRule { head: "r0".into(), body, confidence, support: rng.random_range(0..200) });
    }
    for _ in 0..rng.random_range(0..=5) {
        let asker = if rng.random_bool(0.5) { subject.clone() } else { entity(&mut rng) };
        world.qa.push(QaRow {
            subject: asker,
            relation: relation(&mut rng),
            answer: entity(&mut rng),
            confidence: rng.random::<f64>(),
        });
    }
    let mut weights = BTreeMap::new();
    let mut sigs = vec!["r0:KB".to_string(), "r0:QA".to_string()];
    for rule in &world.rules {
        let mut combos = vec![String::new()];
        for (rel, rev) in &rule.body {
            let tok = format!("{rel}{}", if *rev { "~" } else { "" });
            combos = combos
                .iter()
                .flat_map(|p| {
                    ["KB", "QA"].map(|m| if p.is_empty() { format!("{tok}:{m}") } else { format!("{p}/{tok}:{m}") })
                })
                .collect();
        }
        sigs.extend(combos);
    }
    for sig in sigs {
        // some path types are left unweighted on purpose
        if rng.random_bool(0.85) {
            weights.insert(sig, rng.random_range(-1.0..2.0));
        }
    }
    RandomCase { world, subject, relation: "r0".into(), weights }
}
