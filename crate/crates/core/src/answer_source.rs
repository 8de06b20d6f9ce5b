//! Question-answering providers: given `(subject, relation)` they return
//! candidate objects with confidences in `[0, 1]`.
//!
//! Three implementations are available: a fixture file, a seeded slice of
//! the KB posing as extracted facts, and a remote JSON service. A
//! [`ProbeSession`] wraps any provider for the duration of one completion
//! query and adds the per-query cache and call budget.

use std::collections::HashMap;
use std::io::BufRead;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IngestError, ProviderError};
use crate::kb_store::{canonicalize, FactStore};

pub const DEFAULT_BUDGET: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaAnswer {
    pub entity: String,
    pub confidence: f64,
}

impl QaAnswer {
    pub fn new(entity: impl Into<String>, confidence: f64) -> Self {
        QaAnswer { entity: entity.into(), confidence }
    }
}

/// Deduplicates by entity keeping the maximum confidence, then sorts by
/// descending confidence and ascending entity.
pub fn normalize_answers(mut answers: Vec<QaAnswer>) -> Vec<QaAnswer> {
    answers.sort_by(|a, b| a.entity.cmp(&b.entity).then(b.confidence.total_cmp(&a.confidence)));
    answers.dedup_by(|later, first| later.entity == first.entity);
    answers.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then_with(|| a.entity.cmp(&b.entity)));
    answers
}

pub trait AnswerProvider: Send + Sync {
    /// Answers for the probe `<subject, relation, ?>`, normalized per
    /// [`normalize_answers`]. An empty list is a valid answer.
    fn ask(&self, subject: &str, relation: &str) -> Result<Vec<QaAnswer>, ProviderError>;
}

impl<P: AnswerProvider + ?Sized> AnswerProvider for &P {
    fn ask(&self, subject: &str, relation: &str) -> Result<Vec<QaAnswer>, ProviderError> {
        (**self).ask(subject, relation)
    }
}

impl<P: AnswerProvider + ?Sized> AnswerProvider for Arc<P> {
    fn ask(&self, subject: &str, relation: &str) -> Result<Vec<QaAnswer>, ProviderError> {
        (**self).ask(subject, relation)
    }
}

impl<P: AnswerProvider + ?Sized> AnswerProvider for Box<P> {
    fn ask(&self, subject: &str, relation: &str) -> Result<Vec<QaAnswer>, ProviderError> {
        (**self).ask(subject, relation)
    }
}

/// Read-only provider backed by an in-memory answer table.
#[derive(Debug, Default, Clone)]
pub struct FixtureProvider {
    answers: HashMap<(String, String), Vec<QaAnswer>>,
}

impl FixtureProvider {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds from `(subject, relation, answer, confidence)` rows.
    pub fn from_rows<I, S>(rows: I) -> Self
    where
        I: IntoIterator<Item = (S, S, S, f64)>,
        S: Into<String>,
    {
        let mut grouped: HashMap<(String, String), Vec<QaAnswer>> = HashMap::new();
        for (s, r, a, c) in rows {
            grouped.entry((s.into(), r.into())).or_default().push(QaAnswer::new(a, c));
        }
        let answers = grouped.into_iter().map(|(k, v)| (k, normalize_answers(v))).collect();
        FixtureProvider { answers }
    }

    /// Parses `subject<TAB>relation<TAB>answer<TAB>confidence` lines.
    pub fn load_fixture<R: BufRead>(reader: R) -> Result<Self, IngestError> {
        let mut rows = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(canonicalize).collect();
            if fields.len() != 4 {
                return Err(IngestError::FieldCount {
                    source_name: "qa fixture",
                    line: lineno,
                    expected: 4,
                    found: fields.len(),
                });
            }
            if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
                return Err(IngestError::EmptyField { source_name: "qa fixture", line: lineno, field: pos + 1 });
            }
            let confidence: f64 = fields[3].parse().map_err(|_| IngestError::Number {
                source_name: "qa fixture",
                line: lineno,
                value: fields[3].to_string(),
            })?;
            if !(0.0..=1.0).contains(&confidence) {
                return Err(IngestError::Invalid {
                    source_name: "qa fixture",
                    line: lineno,
                    message: format!("confidence {confidence} outside [0, 1]"),
                });
            }
            rows.push((fields[0].to_string(), fields[1].to_string(), fields[2].to_string(), confidence));
        }
        Ok(Self::from_rows(rows))
    }

    pub fn load_str(text: &str) -> Result<Self, IngestError> {
        Self::load_fixture(text.as_bytes())
    }

    /// Number of distinct probes with at least one answer.
    pub fn probe_count(&self) -> usize {
        self.answers.len()
    }
}

impl AnswerProvider for FixtureProvider {
    fn ask(&self, subject: &str, relation: &str) -> Result<Vec<QaAnswer>, ProviderError> {
        Ok(self
            .answers
            .get(&(subject.to_string(), relation.to_string()))
            .cloned()
            .unwrap_or_default())
    }
}

/// A provider answering from a seeded slice of the KB at a fixed
/// confidence. `held_out_fraction` of the facts (rounded to the nearest
/// count) are chosen by a seeded shuffle of the sorted fact list.
pub fn kb_mock(store: &FactStore, held_out_fraction: f64, fixed_confidence: f64, seed: u64) -> FixtureProvider {
    let fraction = held_out_fraction.clamp(0.0, 1.0);
    let facts: Vec<_> = store.facts().collect();
    let mut order: Vec<usize> = (0..facts.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = (fraction * facts.len() as f64).round() as usize;
    FixtureProvider::from_rows(order.into_iter().take(take).map(|i| {
        let f = facts[i];
        (f.subject.clone(), f.relation.clone(), f.object.clone(), fixed_confidence)
    }))
}

/// Wraps a provider and sleeps a fixed amount before every call.
pub struct DelayedProvider<P> {
    inner: P,
    delay: Duration,
}

impl<P> DelayedProvider<P> {
    pub fn new(inner: P, delay: Duration) -> Self {
        DelayedProvider { inner, delay }
    }
}

impl<P: AnswerProvider> AnswerProvider for DelayedProvider<P> {
    fn ask(&self, subject: &str, relation: &str) -> Result<Vec<QaAnswer>, ProviderError> {
        std::thread::sleep(self.delay);
        self.inner.ask(subject, relation)
    }
}

#[derive(Debug, Deserialize, Serialize)]
pub struct RemoteResponse {
    pub answers: Vec<QaAnswer>,
}

/// Client for `GET {base}/qa?subject=..&relation=..` returning
/// `{"answers":[{"entity":..,"confidence":..}]}`.
#[cfg(feature = "remote")]
pub struct RemoteProvider {
    base_url: String,
    agent: ureq::Agent,
}

#[cfg(feature = "remote")]
impl RemoteProvider {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        RemoteProvider { base_url: base_url.into().trim_end_matches('/').to_string(), agent }
    }
}

#[cfg(feature = "remote")]
impl AnswerProvider for RemoteProvider {
    fn ask(&self, subject: &str, relation: &str) -> Result<Vec<QaAnswer>, ProviderError> {
        let fail = |message: String| ProviderError::Transport {
            subject: subject.to_string(),
            relation: relation.to_string(),
            message,
        };
        let url = format!("{}/qa", self.base_url);
        let mut response = self
            .agent
            .get(&url)
            .query("subject", subject)
            .query("relation", relation)
            .call()
            .map_err(|e| fail(e.to_string()))?;
        let body: RemoteResponse = response.body_mut().read_json().map_err(|e| fail(e.to_string()))?;
        if let Some(bad) = body.answers.iter().find(|a| !(0.0..=1.0).contains(&a.confidence)) {
            return Err(fail(format!("confidence {} outside [0, 1]", bad.confidence)));
        }
        Ok(normalize_answers(body.answers))
    }
}

type Slot = Arc<OnceLock<Result<Vec<QaAnswer>, ProviderError>>>;

/// Per-query view of a provider: caches probes by `(subject, relation)`
/// and charges each uncached probe against a call budget. Safe to share
/// across threads; concurrent asks for the same probe wait on a single call.
pub struct ProbeSession<'p> {
    provider: &'p dyn AnswerProvider,
    cache: Option<Mutex<HashMap<(String, String), Slot>>>,
    remaining: AtomicUsize,
    calls: AtomicUsize,
    exhausted: AtomicBool,
}

impl<'p> ProbeSession<'p> {
    pub fn new(provider: &'p dyn AnswerProvider, budget: usize, cache_enabled: bool) -> Self {
        ProbeSession {
            provider,
            cache: cache_enabled.then(|| Mutex::new(HashMap::new())),
            remaining: AtomicUsize::new(budget),
            calls: AtomicUsize::new(0),
            exhausted: AtomicBool::new(false),
        }
    }

    pub fn ask(&self, subject: &str, relation: &str) -> Result<Vec<QaAnswer>, ProviderError> {
        match &self.cache {
            None => self.call(subject, relation),
            Some(cache) => {
                let slot = {
                    let mut map = cache.lock().expect("probe cache poisoned");
                    map.entry((subject.to_string(), relation.to_string())).or_default().clone()
                };
                slot.get_or_init(|| self.call(subject, relation)).clone()
            }
        }
    }

    /// True when a repeated `ask` would be served without a provider call.
    pub fn is_cached(&self, subject: &str, relation: &str) -> bool {
        self.cache.as_ref().is_some_and(|cache| {
            cache
                .lock()
                .expect("probe cache poisoned")
                .get(&(subject.to_string(), relation.to_string()))
                .is_some_and(|slot| slot.get().is_some())
        })
    }

    pub fn remaining(&self) -> usize {
        self.remaining.load(Ordering::SeqCst)
    }

    /// Provider calls actually issued.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// True once any probe was refused for lack of budget.
    pub fn exhausted(&self) -> bool {
        self.exhausted.load(Ordering::SeqCst)
    }

    pub(crate) fn mark_exhausted(&self) {
        self.exhausted.store(true, Ordering::SeqCst);
    }

    fn call(&self, subject: &str, relation: &str) -> Result<Vec<QaAnswer>, ProviderError> {
        let reserved = self
            .remaining
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        if !reserved {
            self.mark_exhausted();
            return Err(ProviderError::BudgetExhausted {
                subject: subject.to_string(),
                relation: relation.to_string(),
            });
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.provider.ask(subject, relation)
    }
}
