//! Plain-data worlds: facts, rules and QA rows, parsed without any of the
//! main crate's machinery.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

pub type Triple = (String, String, String);

#[derive(Debug, Clone, PartialEq)]
pub struct WorldRule {
    pub head: String,
    /// (relation, reversed)
    pub body: Vec<(String, bool)>,
    pub confidence: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaRow {
    pub subject: String,
    pub relation: String,
    pub answer: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct World {
    pub facts: BTreeSet<Triple>,
    pub rules: Vec<WorldRule>,
    pub qa: Vec<QaRow>,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.split('\t').map(str::trim).collect()))
}

impl World {
    pub fn parse(kb: &str, rules: &str, qa: &str) -> Result<World, String> {
        let mut world = World::default();
        for (n, f) in data_lines(kb) {
            if f.len() != 3 {
                return Err(format!("kb line {n}: {} fields", f.len()));
            }
            world.facts.insert((f[0].into(), f[1].into(), f[2].into()));
        }
        for (n, f) in data_lines(rules) {
            if f.len() != 4 {
                return Err(format!("rules line {n}: {} fields", f.len()));
            }
            let body = f[1]
                .split(',')
                .map(|t| {
                    let t = t.trim();
                    match t.strip_suffix('~') {
                        Some(r) => (r.to_string(), true),
                        None => (t.to_string(), false),
                    }
                })
                .collect();
            world.rules.push(WorldRule {
                head: f[0].into(),
                body,
                confidence: f[2].parse().map_err(|_| format!("rules line {n}: confidence"))?,
                support: f[3].parse().map_err(|_| format!("rules line {n}: support"))?,
            });
        }
        for (n, f) in data_lines(qa) {
            if f.len() != 4 {
                return Err(format!("qa line {n}: {} fields", f.len()));
            }
            world.qa.push(QaRow {
                subject: f[0].into(),
                relation: f[1].into(),
                answer: f[2].into(),
                confidence: f[3].parse().map_err(|_| format!("qa line {n}: confidence"))?,
            });
        }
        Ok(world)
    }

    /// Reads `kb.tsv`, `rules.tsv` and `qa.tsv` from a directory.
    pub fn load_dir(dir: &Path) -> Result<World, String> {
        let read = |name: &str| fs::read_to_string(dir.join(name)).map_err(|e| format!("{name}: {e}"));
        World::parse(&read("kb.tsv")?, &read("rules.tsv")?, &read("qa.tsv")?)
    }

    pub fn kb_text(&self) -> String {
        self.facts.iter().map(|(s, r, o)| format!("{s}\t{r}\t{o}\n")).collect()
    }

    pub fn rules_text(&self) -> String {
        self.rules
            .iter()
            .map(|r| {
                let body: Vec<String> =
                    r.body.iter().map(|(rel, rev)| if *rev { format!("{rel}~") } else { rel.clone() }).collect();
                format!("{}\t{}\t{}\t{}\n", r.head, body.join(","), r.confidence, r.support)
            })
            .collect()
    }

    pub fn qa_text(&self) -> String {
        self.qa
            .iter()
            .map(|q| format!("{}\t{}\t{}\t{}\n", q.subject, q.relation, q.answer, q.confidence))
            .collect()
    }

    /// The same world with every `(subject, relation, *)` fact removed.
    pub fn masked(&self, subject: &str, relation: &str) -> World {
        let mut w = self.clone();
        w.facts.retain(|(s, r, _)| !(s == subject && r == relation));
        w
    }

    pub fn objects(&self, subject: &str, relation: &str) -> BTreeSet<String> {
        self.facts
            .iter()
            .filter(|(s, r, _)| s == subject && r == relation)
            .map(|(_, _, o)| o.clone())
            .collect()
    }

    /// Largest number of neighbours reachable in one step from any entity.
    pub fn max_fan_out(&self) -> usize {
        let mut best = 1;
        let entities: BTreeSet<&String> = self
            .facts
            .iter()
            .flat_map(|(s, _, o)| [s, o])
            .chain(self.qa.iter().map(|q| &q.subject))
            .collect();
        let relations: BTreeSet<&String> =
            self.facts.iter().map(|(_, r, _)| r).chain(self.qa.iter().map(|q| &q.relation)).collect();
        for e in &entities {
            for r in &relations {
                let fwd = self.facts.iter().filter(|(s, rr, _)| s == *e && rr == *r).count();
                let rev = self.facts.iter().filter(|(_, rr, o)| o == *e && rr == *r).count();
                let qa = self.qa.iter().filter(|q| &q.subject == *e && &q.relation == *r).count();
                best = best.max(fwd).max(rev).max(qa);
            }
        }
        best
    }

    /// Everything a query `<subject, relation, ?>` can touch within two
    /// steps: facts incident to the subject or to any first-step neighbour
    /// of a two-literal rule, plus QA rows asked of those entities.
    pub fn neighbourhood(&self, subject: &str, relation: &str) -> World {
        let rules: Vec<WorldRule> = self.rules.iter().filter(|r| r.head == relation).cloned().collect();
        let mut near: BTreeSet<String> = BTreeSet::from([subject.to_string()]);
        for rule in rules.iter().filter(|r| r.body.len() == 2) {
            let (rel, _) = &rule.body[0];
            for (s, r, o) in &self.facts {
                if r == rel && s == subject {
                    near.insert(o.clone());
                }
                if r == rel && o == subject {
                    near.insert(s.clone());
                }
            }
            for q in &self.qa {
                if q.subject == subject && &q.relation == rel {
                    near.insert(q.answer.clone());
                }
            }
        }
        World {
            facts: self.facts.iter().filter(|(s, _, o)| near.contains(s) || near.contains(o)).cloned().collect(),
            rules,
            qa: self.qa.iter().filter(|q| near.contains(&q.subject)).cloned().collect(),
        }
    }
}
