use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::text;

/// Boolean keyword rule assigning one subject category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRule {
    pub category_id: String,
    #[serde(default = "any_language")]
    pub language: String,
    #[serde(default)]
    pub all_of: Vec<String>,
    /// `(term, weight)` pairs; weights are positive.
    #[serde(default)]
    pub any_of: Vec<(String, u32)>,
    #[serde(default)]
    pub none_of: Vec<String>,
    #[serde(default)]
    pub threshold: u32,
}

fn any_language() -> String {
    "*".to_string()
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RuleError {
    #[error("rule {0}: any_of weight must be positive")]
    ZeroWeight(String),
    #[error("rule {0}: matches every text")]
    Unconstrained(String),
    #[error("invalid rules file: {0}")]
    Parse(String),
}

impl CategoryRule {
    pub fn validate(&self) -> Result<(), RuleError> {
        if self.any_of.iter().any(|(_, w)| *w == 0) {
            return Err(RuleError::ZeroWeight(self.category_id.clone()));
        }
        if self.all_of.is_empty() && self.any_of.is_empty() {
            return Err(RuleError::Unconstrained(self.category_id.clone()));
        }
        Ok(())
    }

    pub fn applies_to(&self, language: &str) -> bool {
        self.language == "*" || self.language == language
    }

    fn matches(&self, doc: &MatchText) -> bool {
        if !self.all_of.iter().all(|t| doc.contains(t)) {
            return false;
        }
        if self.none_of.iter().any(|t| doc.contains(t)) {
            return false;
        }
        let evidence: u64 = self
            .any_of
            .iter()
            .filter(|(t, _)| doc.contains(t))
            .map(|(_, w)| u64::from(*w))
            .sum();
        evidence >= u64::from(self.threshold)
    }
}

pub fn parse_rules(json: &str) -> Result<Vec<CategoryRule>, RuleError> {
    let rules: Vec<CategoryRule> = serde_json::from_str(json).map_err(|e| RuleError::Parse(e.to_string()))?;
    for r in &rules {
        r.validate()?;
    }
    Ok(rules)
}

struct MatchText {
    tokens: Vec<String>,
    set: HashSet<String>,
}

impl MatchText {
    fn new(text: &str) -> Self {
        let tokens = text::words(text);
        let set = tokens.iter().cloned().collect();
        Self { tokens, set }
    }

    fn contains(&self, term: &str) -> bool {
        let words = text::term_words(term);
        match words.as_slice() {
            [] => false,
            [w] => self.set.contains(w),
            _ => text::contains_phrase(&self.tokens, &words),
        }
    }
}

/// Category ids of every rule for `language` matching `text` (title and
/// body), using case-insensitive whole-word matching.
pub fn categorize(text: &str, language: &str, rules: &[CategoryRule]) -> BTreeSet<String> {
    let doc = MatchText::new(text);
    rules
        .iter()
        .filter(|r| r.applies_to(language) && r.matches(&doc))
        .map(|r| r.category_id.clone())
        .collect()
}
