//! Indexed, immutable-after-load store of knowledge base triples.
//!
//! Facts are kept in a sorted set together with a forward index
//! `relation -> subject -> objects` and a reverse index
//! `relation -> object -> subjects`. Both index leaves are kept sorted so
//! lookups come back in lexicographic order without extra work.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::IngestError;

/// A `<subject, relation, object>` triple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Fact {
    pub fn new(subject: impl Into<String>, relation: impl Into<String>, object: impl Into<String>) -> Self {
        Fact {
            subject: subject.into(),
            relation: relation.into(),
            object: object.into(),
        }
    }
}

/// Trims surrounding whitespace. Case, underscores and Unicode form are kept as-is.
pub fn canonicalize(raw: &str) -> &str {
    raw.trim()
}

type Index = HashMap<String, HashMap<String, Vec<String>>>;

/// Read access to a set of KB facts. Implemented by [`FactStore`] and by
/// [`MaskedView`], which hides a handful of facts during evaluation.
pub trait FactView: Sync {
    /// Objects `o` with `(subject, relation, o)` stored, lexicographically ordered.
    fn objects_of(&self, subject: &str, relation: &str) -> Vec<&str>;
    /// Subjects `s` with `(s, relation, object)` stored, lexicographically ordered.
    fn subjects_of(&self, relation: &str, object: &str) -> Vec<&str>;
}

#[derive(Debug, Default, Clone)]
pub struct FactStore {
    facts: BTreeSet<Fact>,
    forward: Index,
    reverse: Index,
    relation_counts: BTreeMap<String, usize>,
}

impl FactStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a store from already-parsed facts. Duplicates collapse.
    pub fn from_facts<I: IntoIterator<Item = Fact>>(facts: I) -> Self {
        let mut store = FactStore::new();
        for f in facts {
            store.insert(f);
        }
        store
    }

    /// Parses `subject<TAB>relation<TAB>object` lines. Blank lines and
    /// `#` comments are skipped.
    pub fn load_triples<R: BufRead>(reader: R) -> Result<Self, IngestError> {
        let mut store = FactStore::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(IngestError::FieldCount {
                    source_name: "facts",
                    line: lineno,
                    expected: 3,
                    found: fields.len(),
                });
            }
            let mut parts = [""; 3];
            for (i, raw) in fields.iter().enumerate() {
                let value = canonicalize(raw);
                if value.is_empty() {
                    return Err(IngestError::EmptyField {
                        source_name: "facts",
                        line: lineno,
                        field: i + 1,
                    });
                }
                parts[i] = value;
            }
            store.insert(Fact::new(parts[0], parts[1], parts[2]));
        }
        log::debug!("loaded {} facts", store.len());
        Ok(store)
    }

    pub fn load_str(text: &str) -> Result<Self, IngestError> {
        Self::load_triples(text.as_bytes())
    }

    fn insert(&mut self, fact: Fact) {
        if self.facts.contains(&fact) {
            return;
        }
        insert_sorted(&mut self.forward, &fact.relation, &fact.subject, &fact.object);
        insert_sorted(&mut self.reverse, &fact.relation, &fact.object, &fact.subject);
        *self.relation_counts.entry(fact.relation.clone()).or_default() += 1;
        self.facts.insert(fact);
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn contains(&self, subject: &str, relation: &str, object: &str) -> bool {
        self.forward
            .get(relation)
            .and_then(|m| m.get(subject))
            .is_some_and(|objs| objs.binary_search_by(|o| o.as_str().cmp(object)).is_ok())
    }

    /// All facts in `(subject, relation, object)` order.
    pub fn facts(&self) -> impl Iterator<Item = &Fact> {
        self.facts.iter()
    }

    pub fn relation_counts(&self) -> &BTreeMap<String, usize> {
        &self.relation_counts
    }

    /// Distinct subjects that have at least one object for `relation`, sorted.
    pub fn subjects_with(&self, relation: &str) -> Vec<&str> {
        let mut subjects: Vec<&str> = self
            .forward
            .get(relation)
            .map(|m| m.keys().map(String::as_str).collect())
            .unwrap_or_default();
        subjects.sort_unstable();
        subjects
    }

    /// Renders the store in the triple file format, one fact per line in sorted order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for f in &self.facts {
            let _ = writeln!(out, "{}\t{}\t{}", f.subject, f.relation, f.object);
        }
        out
    }
}

fn insert_sorted(index: &mut Index, relation: &str, key: &str, value: &str) {
    let leaf = index
        .entry(relation.to_string())
        .or_default()
        .entry(key.to_string())
        .or_default();
    if let Err(pos) = leaf.binary_search_by(|v| v.as_str().cmp(value)) {
        leaf.insert(pos, value.to_string());
    }
}

fn lookup<'a>(index: &'a Index, relation: &str, key: &str) -> Vec<&'a str> {
    index
        .get(relation)
        .and_then(|m| m.get(key))
        .map(|v| v.iter().map(String::as_str).collect())
        .unwrap_or_default()
}

impl FactView for FactStore {
    fn objects_of(&self, subject: &str, relation: &str) -> Vec<&str> {
        lookup(&self.forward, relation, subject)
    }

    fn subjects_of(&self, relation: &str, object: &str) -> Vec<&str> {
        lookup(&self.reverse, relation, object)
    }
}

/// A store with some facts hidden, used to keep an evaluated query's own
/// answers out of its evidence.
pub struct MaskedView<'a> {
    store: &'a FactStore,
    hidden: HashSet<Fact>,
}

impl<'a> MaskedView<'a> {
    pub fn new(store: &'a FactStore, hidden: impl IntoIterator<Item = Fact>) -> Self {
        MaskedView {
            store,
            hidden: hidden.into_iter().collect(),
        }
    }

    /// Hides every `(subject, relation, o)` for `o` in `objects`.
    pub fn hiding_answers<I, S>(store: &'a FactStore, subject: &str, relation: &str, objects: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let hidden = objects
            .into_iter()
            .map(|o| Fact::new(subject, relation, o.as_ref()));
        Self::new(store, hidden)
    }

    fn is_hidden(&self, subject: &str, relation: &str, object: &str) -> bool {
        !self.hidden.is_empty()
            && self.hidden.contains(&Fact::new(subject, relation, object))
    }
}

impl FactView for MaskedView<'_> {
    fn objects_of(&self, subject: &str, relation: &str) -> Vec<&str> {
        let mut objs = self.store.objects_of(subject, relation);
        objs.retain(|o| !self.is_hidden(subject, relation, o));
        objs
    }

    fn subjects_of(&self, relation: &str, object: &str) -> Vec<&str> {
        let mut subs = self.store.subjects_of(relation, object);
        subs.retain(|s| !self.is_hidden(s, relation, object));
        subs
    }
}
