//! Horn-clause rules with one or two body literals.
//!
//! Rule file lines are `head<TAB>body<TAB>confidence<TAB>support`, where the
//! body is one or two comma separated literals and a trailing `~` marks a
//! literal traversed against the relation's direction.

use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::IngestError;

pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.1;
pub const DEFAULT_MIN_SUPPORT: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub relation: String,
    pub reversed: bool,
}

impl Literal {
    pub fn forward(relation: impl Into<String>) -> Self {
        Literal { relation: relation.into(), reversed: false }
    }

    pub fn reverse(relation: impl Into<String>) -> Self {
        Literal { relation: relation.into(), reversed: true }
    }

    pub fn parse(token: &str) -> Option<Self> {
        let token = token.trim();
        let (relation, reversed) = match token.strip_suffix('~') {
            Some(r) => (r.trim(), true),
            None => (token, false),
        };
        if relation.is_empty() || relation.contains('~') {
            return None;
        }
        Some(Literal { relation: relation.to_string(), reversed })
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.reversed {
            write!(f, "{}~", self.relation)
        } else {
            f.write_str(&self.relation)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub head: String,
    pub body: Vec<Literal>,
    pub confidence: f64,
    pub support: u64,
}

impl Rule {
    pub fn new(head: impl Into<String>, body: Vec<Literal>, confidence: f64, support: u64) -> Self {
        Rule { head: head.into(), body, confidence, support }
    }

    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.body.iter().map(Literal::to_string).collect();
        write!(f, "{}\t{}\t{}\t{}", self.head, body.join(","), self.confidence, self.support)
    }
}

/// Parses a rule file. Rules are returned in file order; when the same
/// head and body appear twice, the higher-confidence entry is kept at the
/// position of the first occurrence.
pub fn parse_rules<R: BufRead>(reader: R) -> Result<Vec<Rule>, IngestError> {
    let mut rules: Vec<Rule> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let rule = parse_line(&line, lineno)?;
        match rules.iter_mut().find(|r| r.head == rule.head && r.body == rule.body) {
            Some(existing) => {
                if rule.confidence > existing.confidence {
                    *existing = rule;
                }
            }
            None => rules.push(rule),
        }
    }
    Ok(rules)
}

pub fn parse_rules_str(text: &str) -> Result<Vec<Rule>, IngestError> {
    parse_rules(text.as_bytes())
}

fn parse_line(line: &str, lineno: usize) -> Result<Rule, IngestError> {
    let invalid = |message: String| IngestError::Invalid { source_name: "rules", line: lineno, message };
    let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(IngestError::FieldCount {
            source_name: "rules",
            line: lineno,
            expected: 4,
            found: fields.len(),
        });
    }
    if fields[0].is_empty() {
        return Err(IngestError::EmptyField { source_name: "rules", line: lineno, field: 1 });
    }
    let body = if fields[1].is_empty() {
        Vec::new()
    } else {
        fields[1]
            .split(',')
            .map(|tok| Literal::parse(tok).ok_or_else(|| invalid(format!("bad literal {tok:?}"))))
            .collect::<Result<Vec<_>, _>>()?
    };
    if body.is_empty() || body.len() > 2 {
        return Err(invalid(format!("rule body must have 1 or 2 literals, found {}", body.len())));
    }
    let confidence: f64 = fields[2].parse().map_err(|_| IngestError::Number {
        source_name: "rules",
        line: lineno,
        value: fields[2].to_string(),
    })?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(invalid(format!("confidence {confidence} outside [0, 1]")));
    }
    let support: u64 = fields[3].parse().map_err(|_| IngestError::Number {
        source_name: "rules",
        line: lineno,
        value: fields[3].to_string(),
    })?;
    Ok(Rule::new(fields[0], body, confidence, support))
}

/// Keeps rules with `confidence >= min_confidence` and `support >= min_support`.
pub fn filter_rules(rules: &[Rule], min_confidence: f64, min_support: u64) -> Vec<Rule> {
    rules
        .iter()
        .filter(|r| r.confidence >= min_confidence && r.support >= min_support)
        .cloned()
        .collect()
}

pub fn rules_for(rules: &[Rule], relation: &str) -> Vec<Rule> {
    rules.iter().filter(|r| r.head == relation).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLES: &str = "hasChild\tisMarriedTo,hasChild\t0.6\t120\n\
                            wasBornIn\tdiedIn\t0.3\t500\n\
                            wasBornIn\thasChild~,wasBornIn\t0.5\t80\n";

    #[test]
    fn parses_paper_style_rules() {
        let rules = parse_rules_str(EXAMPLES).unwrap();
        assert_eq!(rules.len(), 3);
        assert_eq!(rules[0].head, "hasChild");
        assert_eq!(rules[0].body, vec![Literal::forward("isMarriedTo"), Literal::forward("hasChild")]);
        assert_eq!(rules[0].confidence, 0.6);
        assert_eq!(rules[0].support, 120);
        assert_eq!(rules[1].body, vec![Literal::forward("diedIn")]);
        assert_eq!(rules[2].body[0], Literal::reverse("hasChild"));
        assert!(!rules[2].body[1].reversed);
    }

    #[test]
    fn rejects_bad_bodies_and_numbers() {
        assert!(parse_rules_str("h\t\t0.5\t1\n").is_err());
        assert!(parse_rules_str("h\ta,b,c\t0.5\t1\n").is_err());
        assert!(parse_rules_str("h\ta\t1.5\t1\n").is_err());
        assert!(parse_rules_str("h\ta\t-0.1\t1\n").is_err());
        assert!(matches!(
            parse_rules_str("h\ta\tabc\t1\n"),
            Err(IngestError::Number { line: 1, .. })
        ));
        assert!(parse_rules_str("h\ta\t0.5\t-3\n").is_err());
        assert!(parse_rules_str("h\ta~~\t0.5\t3\n").is_err());
    }

    #[test]
    fn duplicate_rules_keep_higher_confidence() {
        let rules = parse_rules_str("h\ta\t0.2\t5\nh\tb\t0.4\t5\nh\ta\t0.7\t9\n").unwrap();
        assert_eq!(rules.len(), 2);
        assert_eq!(rules[0].confidence, 0.7);
        assert_eq!(rules[0].support, 9);
    }

    #[test]
    fn filtering_examples() {
        let rules: Vec<Rule> = [0.05, 0.3, 0.9]
            .iter()
            .map(|&c| Rule::new("h", vec![Literal::forward("b")], c, 100))
            .collect();
        let kept = filter_rules(&rules, 0.1, 10);
        assert_eq!(kept, rules[1..].to_vec());
        assert_eq!(filter_rules(&rules, 0.0, 0), rules);
        assert!(filter_rules(&rules, 1.1, 0).is_empty());
    }

    #[test]
    fn selection_by_head() {
        let rules = parse_rules_str(EXAMPLES).unwrap();
        let born = rules_for(&rules, "wasBornIn");
        assert_eq!(born.len(), 2);
        assert!(rules_for(&rules, "isCitizenOf").is_empty());
        assert_eq!(rules_for(&rules, "hasChild"), vec![rules[0].clone()]);
    }

    fn arb_rules() -> impl Strategy<Value = Vec<Rule>> {
        proptest::collection::vec(
            ("h[0-2]", "b[0-3]", 0.0f64..=1.0, 0u64..50),
            0..20,
        )
        .prop_map(|v| {
            v.into_iter()
                .map(|(h, b, c, s)| Rule::new(h, vec![Literal::forward(b)], c, s))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn filter_is_idempotent_and_monotone(
            rules in arb_rules(),
            c1 in 0.0f64..1.0, c2 in 0.0f64..1.0, s1 in 0u64..40, s2 in 0u64..40,
        ) {
            let once = filter_rules(&rules, c1, s1);
            prop_assert_eq!(filter_rules(&once, c1, s1), once.clone());
            let stricter = filter_rules(&rules, c1.max(c2), s1.max(s2));
            prop_assert!(stricter.len() <= once.len());
            prop_assert!(stricter.iter().all(|r| once.contains(r)));
        }

        #[test]
        fn heads_partition_catalog(rules in arb_rules()) {
            let mut heads: Vec<&str> = rules.iter().map(|r| r.head.as_str()).collect();
            heads.sort_unstable();
            heads.dedup();
            let total: usize = heads.iter().map(|h| rules_for(&rules, h).len()).sum();
            prop_assert_eq!(total, rules.len());
        }
    }
}
