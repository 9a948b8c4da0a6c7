use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::text;

/// Tokens before a lexicon term searched for a negator.
pub const NEGATION_WINDOW: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TonalityLexicon {
    pub language: String,
    pub term_scores: BTreeMap<String, f64>,
}

/// Mean score of matched lexicon terms, each flipped when a negator occurs
/// within the two preceding tokens. 0.0 when nothing matches.
pub fn tonality(text: &str, lexicon: &TonalityLexicon, negators: &HashSet<String>) -> f64 {
    let words = text::words(text);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, w) in words.iter().enumerate() {
        let Some(score) = lexicon.term_scores.get(w) else { continue };
        let negated = words[i.saturating_sub(NEGATION_WINDOW)..i].iter().any(|p| negators.contains(p));
        sum += if negated { -score } else { *score };
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).clamp(-1.0, 1.0)
    }
}
