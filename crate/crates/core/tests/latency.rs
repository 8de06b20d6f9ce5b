use std::time::{Duration, Instant};

use kbc_core::answer_source::{DelayedProvider, FixtureProvider};
use kbc_core::kb_store::FactStore;
use kbc_core::mkg_builder::{expand_path_types, QueryConfig};
use kbc_core::path_fusion::{complete, WeightKind, WeightTable};
use kbc_core::rule_catalog::parse_rules_str;

// Probes of one phase run concurrently only with the parallel feature.
#[cfg_attr(not(feature = "parallel"), ignore)]
#[test]
fn latency_is_about_two_provider_calls() {
    let store = FactStore::load_str("Henry\thasChild\tMarvin\nMarvin\tisMarriedTo\tGloria\n").unwrap();
    let rules = parse_rules_str(
        "wasBornIn\thasChild~,wasBornIn\t0.5\t80\nwasBornIn\tisMarriedTo,wasBornIn\t0.4\t120\nwasBornIn\tdiedIn\t0.3\t500\n",
    )
    .unwrap();
    let qa = FixtureProvider::load_str(
        "Marvin\twasBornIn\tNYC\t0.6\nMarvin\tisMarriedTo\tGloria\t0.8\nHenry\twasBornIn\tNYC\t0.7\nGloria\twasBornIn\tNYC\t0.9\n",
    )
    .unwrap();
    let slow = DelayedProvider::new(qa, Duration::from_millis(200));
    let n_types = expand_path_types("wasBornIn", &rules).len();
    let config = QueryConfig { k: 3, parallelism: n_types, ..QueryConfig::default() };
    let weights = WeightTable::new("wasBornIn", WeightKind::Frequency);
    let start = Instant::now();
    let done = complete("Marvin", "wasBornIn", &rules, &store, &slow, &weights, &config);
    let elapsed = start.elapsed();
    assert!(done.stats.provider_calls >= 4);
    assert!(elapsed < Duration::from_millis(600), "{elapsed:?}");
    assert!(elapsed >= Duration::from_millis(400), "two dependent phases cannot overlap: {elapsed:?}");
}
