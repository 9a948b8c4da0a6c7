use std::collections::HashMap;

use crate::text::Token;

/// Index of multi-word phrases keyed by their first word, used for
/// dictionary lookups over token streams.
/// A phrase's words and the values stored under it.
type Entry<T> = (Vec<String>, Vec<T>);

#[derive(Debug, Clone)]
pub struct PhraseMatcher<T> {
    by_first: HashMap<String, Vec<Entry<T>>>,
}

impl<T> Default for PhraseMatcher<T> {
    fn default() -> Self {
        Self { by_first: HashMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseMatch<'a, T> {
    /// Token index range, end exclusive.
    pub start: usize,
    pub end: usize,
    pub values: &'a [T],
}

impl<T: PartialEq> PhraseMatcher<T> {
    pub fn insert(&mut self, words: Vec<String>, value: T) {
        let Some(first) = words.first().cloned() else { return };
        let bucket = self.by_first.entry(first).or_default();
        match bucket.iter_mut().find(|(w, _)| *w == words) {
            Some((_, values)) => {
                if !values.contains(&value) {
                    values.push(value);
                }
            }
            None => bucket.push((words, vec![value])),
        }
    }

    /// Phrases starting at token `i`, longest first.
    fn longest_at<'a>(&'a self, tokens: &[Token], i: usize) -> Option<(usize, &'a [T])> {
        let bucket = self.by_first.get(&tokens[i].lower)?;
        bucket
            .iter()
            .filter(|(words, _)| {
                i + words.len() <= tokens.len()
                    && words.iter().zip(&tokens[i..]).all(|(w, t)| *w == t.lower)
            })
            .max_by_key(|(words, _)| words.len())
            .map(|(words, values)| (words.len(), values.as_slice()))
    }

    /// Leftmost-longest, non-overlapping matches in token order.
    pub fn find_all<'a>(&'a self, tokens: &[Token]) -> Vec<PhraseMatch<'a, T>> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            match self.longest_at(tokens, i) {
                Some((len, values)) => {
                    out.push(PhraseMatch { start: i, end: i + len, values });
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{term_words, tokenize};

    #[test]
    fn longest_match_wins() {
        let mut m = PhraseMatcher::default();
        m.insert(term_words("Merkel"), 1u64);
        m.insert(term_words("Angela Merkel"), 1u64);
        m.insert(term_words("Angela"), 2u64);
        let toks = tokenize("Angela Merkel and Merkel");
        let found = m.find_all(&toks);
        assert_eq!(found.len(), 2);
        assert_eq!((found[0].start, found[0].end), (0, 2));
        assert_eq!((found[1].start, found[1].end), (3, 4));
    }
}
