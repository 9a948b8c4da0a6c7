//! Tokenisation shared by every text-processing stage: Unicode word
//! boundaries, lowercase folding, no stemming.

use unicode_segmentation::UnicodeSegmentation;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub lower: String,
    pub byte_start: usize,
    pub byte_end: usize,
}

pub fn tokenize(text: &str) -> Vec<Token> {
    text.unicode_word_indices()
        .map(|(start, word)| Token {
            lower: word.to_lowercase(),
            byte_start: start,
            byte_end: start + word.len(),
        })
        .collect()
}

/// Lowercased words of `text`.
pub fn words(text: &str) -> Vec<String> {
    text.unicode_words().map(str::to_lowercase).collect()
}

/// Lowercased words of a gazetteer or rule term, used for phrase matching.
pub fn term_words(term: &str) -> Vec<String> {
    words(term)
}

/// Number of chars before byte offset `byte` in `text`.
pub fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// The first `n` words of `text` joined by single spaces.
pub fn first_words(text: &str, n: usize) -> String {
    text.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

/// Finds `phrase` (already lowercased words) as a contiguous token run.
pub fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    match phrase.len() {
        0 => false,
        1 => tokens.iter().any(|t| *t == phrase[0]),
        n => tokens.windows(n).any(|w| w == phrase),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_carry_offsets() {
        let toks = tokenize("Paris, Texas \u{2014} «Oui»");
        let lowers: Vec<_> = toks.iter().map(|t| t.lower.as_str()).collect();
        assert_eq!(lowers, ["paris", "texas", "oui"]);
        assert_eq!(&"Paris, Texas"[toks[1].byte_start..toks[1].byte_end], "Texas");
    }

    #[test]
    fn snippet_words() {
        assert_eq!(first_words("  a b\n c d ", 3), "a b c");
    }

    #[test]
    fn phrase_search() {
        let toks = words("the bird flu spreads");
        assert!(contains_phrase(&toks, &words("bird flu")));
        assert!(!contains_phrase(&toks, &words("flu bird")));
    }
}
