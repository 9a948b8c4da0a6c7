//! Bundled seed data and the plain-text list formats used for it.
//!
//! Term lists are one term per line; lexicons are `term<TAB>score`. Lines
//! starting with `#` and blank lines are ignored in both.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::OnceLock;

use crate::ingest::LanguageProfile;
use crate::linguistic::TonalityLexicon;

const COUNTRIES: &str = include_str!("../data/countries.tsv");

const SEED_TEXTS: &[(&str, &str)] = &[
    ("de", include_str!("../data/lang/de.txt")),
    ("en", include_str!("../data/lang/en.txt")),
    ("es", include_str!("../data/lang/es.txt")),
    ("fr", include_str!("../data/lang/fr.txt")),
    ("it", include_str!("../data/lang/it.txt")),
];

const STOPWORDS: &[(&str, &str)] = &[
    ("de", include_str!("../data/stopwords/de.txt")),
    ("en", include_str!("../data/stopwords/en.txt")),
    ("es", include_str!("../data/stopwords/es.txt")),
    ("fr", include_str!("../data/stopwords/fr.txt")),
    ("it", include_str!("../data/stopwords/it.txt")),
];

const VERBS: &[(&str, &str)] = &[
    ("de", include_str!("../data/verbs/de.txt")),
    ("en", include_str!("../data/verbs/en.txt")),
    ("fr", include_str!("../data/verbs/fr.txt")),
];

const NEGATORS: &[(&str, &str)] = &[
    ("de", include_str!("../data/negators/de.txt")),
    ("en", include_str!("../data/negators/en.txt")),
    ("fr", include_str!("../data/negators/fr.txt")),
];

const LEXICONS: &[(&str, &str)] = &[
    ("de", include_str!("../data/lexicons/de.tsv")),
    ("en", include_str!("../data/lexicons/en.tsv")),
    ("fr", include_str!("../data/lexicons/fr.tsv")),
];

pub const DEFAULT_RULES: &str = include_str!("../data/rules.json");
pub const DEFAULT_ENTITIES: &str = include_str!("../data/entities.jsonl");
pub const DEFAULT_TOPONYMS: &str = include_str!("../data/toponyms.jsonl");

#[derive(Debug, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ListParseError {
    pub line: usize,
    pub message: String,
}

fn content_lines(src: &str) -> impl Iterator<Item = (usize, &str)> {
    src.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses a term-per-line list, lowercasing every term.
pub fn parse_term_list(src: &str) -> HashSet<String> {
    content_lines(src).map(|(_, l)| l.to_lowercase()).collect()
}

/// Parses a `term<TAB>score` lexicon. Scores must lie in [-1, 1].
pub fn parse_lexicon(language: &str, src: &str) -> Result<TonalityLexicon, ListParseError> {
    let mut term_scores = BTreeMap::new();
    for (line, l) in content_lines(src) {
        let (term, score) = l.split_once('\t').ok_or_else(|| ListParseError {
            line,
            message: "expected term<TAB>score".into(),
        })?;
        let score: f64 = score.trim().parse().map_err(|_| ListParseError {
            line,
            message: format!("bad score {score:?}"),
        })?;
        if !(-1.0..=1.0).contains(&score) {
            return Err(ListParseError { line, message: format!("score {score} outside [-1, 1]") });
        }
        term_scores.insert(term.trim().to_lowercase(), score);
    }
    Ok(TonalityLexicon { language: language.to_string(), term_scores })
}

pub struct CountryTable {
    names: BTreeMap<String, Vec<String>>,
}

impl CountryTable {
    pub fn is_known(&self, code: &str) -> bool {
        self.names.contains_key(code)
    }

    /// English names and common short forms for a code.
    pub fn names(&self, code: &str) -> &[String] {
        self.names.get(code).map(Vec::as_slice).unwrap_or(&[])
    }
}

pub fn countries() -> &'static CountryTable {
    static TABLE: OnceLock<CountryTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let names = content_lines(COUNTRIES)
            .filter_map(|(_, l)| l.split_once('\t'))
            .map(|(code, names)| (code.to_string(), names.split('|').map(str::to_string).collect()))
            .collect();
        CountryTable { names }
    })
}

/// Character n-gram profiles trained on the bundled seed texts.
pub fn language_profiles() -> &'static [LanguageProfile] {
    static PROFILES: OnceLock<Vec<LanguageProfile>> = OnceLock::new();
    PROFILES.get_or_init(|| {
        SEED_TEXTS
            .iter()
            .map(|(lang, text)| LanguageProfile::train(lang, text))
            .collect()
    })
}

pub fn seed_text(language: &str) -> Option<&'static str> {
    SEED_TEXTS.iter().find(|(l, _)| *l == language).map(|(_, t)| *t)
}

fn lists(table: &'static [(&'static str, &'static str)]) -> HashMap<String, HashSet<String>> {
    table.iter().map(|(l, src)| (l.to_string(), parse_term_list(src))).collect()
}

pub fn stopwords() -> &'static HashMap<String, HashSet<String>> {
    static S: OnceLock<HashMap<String, HashSet<String>>> = OnceLock::new();
    S.get_or_init(|| lists(STOPWORDS))
}

pub fn reporting_verbs() -> HashMap<String, HashSet<String>> {
    lists(VERBS)
}

pub fn negators() -> HashMap<String, HashSet<String>> {
    lists(NEGATORS)
}

pub fn lexicons() -> HashMap<String, TonalityLexicon> {
    LEXICONS
        .iter()
        .map(|(l, src)| (l.to_string(), parse_lexicon(l, src).expect("bundled lexicon is valid")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lists_parse() {
        assert!(countries().is_known("FR"));
        assert!(countries().names("US").iter().any(|n| n == "United States"));
        assert_eq!(language_profiles().len(), SEED_TEXTS.len());
        assert!(stopwords()["en"].contains("the"));
        assert!(reporting_verbs()["en"].contains("said"));
        assert!(lexicons()["en"].term_scores["good"] > 0.0);
    }

    #[test]
    fn lexicon_rejects_out_of_range() {
        let err = parse_lexicon("en", "good\t1.5\n").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(parse_lexicon("en", "# header\ngood 0.5\n").is_err());
    }
}
