//! Direct-speech quotation extraction with speaker attribution.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::entities::{EntityKind, Mention};
use crate::text::{self, Token};
use crate::types::{ArticleId, EntityId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub article_id: ArticleId,
    pub speaker_entity: Option<EntityId>,
    pub text: String,
    pub mentioned_entities: BTreeSet<EntityId>,
    /// Byte range of the quoted material in the analysed text.
    pub byte_start: usize,
    pub byte_end: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuoteExtraction {
    pub quotes: Vec<Quote>,
    /// Quote marks left unpaired; those spans are skipped.
    pub unbalanced: usize,
}

#[derive(Debug, Clone, Copy)]
struct Span {
    /// Byte offset of the opening mark and one past the closing mark.
    open: usize,
    close_end: usize,
    inner_start: usize,
    inner_end: usize,
}

fn closer_for(c: char) -> Option<char> {
    match c {
        '"' => Some('"'),
        '“' => Some('”'),
        '«' => Some('»'),
        '„' => Some('“'),
        _ => None,
    }
}

fn quote_spans(text: &str) -> (Vec<Span>, usize) {
    let mut spans = Vec::new();
    let mut unbalanced = 0;
    let mut open: Option<(usize, char)> = None;
    for (i, c) in text.char_indices() {
        match open {
            Some((start, closer)) if c == closer => {
                spans.push(Span {
                    open: start,
                    close_end: i + c.len_utf8(),
                    inner_start: start + text[start..].chars().next().map_or(1, char::len_utf8),
                    inner_end: i,
                });
                open = None;
            }
            Some(_) => {}
            None => {
                if let Some(closer) = closer_for(c) {
                    open = Some((i, closer));
                } else if c == '”' || c == '»' {
                    unbalanced += 1;
                }
            }
        }
    }
    if open.is_some() {
        unbalanced += 1;
    }
    (spans, unbalanced)
}

fn is_speaker(m: &Mention) -> bool {
    m.kind != EntityKind::Location
}

/// Index of the first token starting at or after `byte`.
fn token_at(tokens: &[Token], byte: usize) -> usize {
    tokens.partition_point(|t| t.byte_start < byte)
}

fn mention_spanning<'a>(mentions: &'a [Mention], tokens: &[Token], first: usize, last: usize) -> Option<&'a Mention> {
    let (s, e) = (tokens[first].byte_start, tokens[last].byte_end);
    mentions.iter().find(|m| m.byte_start == s && m.byte_end == e && is_speaker(m))
}

/// Mention whose last token is `idx`, if any.
fn mention_ending_at<'a>(mentions: &'a [Mention], tokens: &[Token], idx: usize) -> Option<&'a Mention> {
    let end = tokens[idx].byte_end;
    mentions.iter().find(|m| m.byte_end == end && is_speaker(m))
}

fn mention_starting_at<'a>(mentions: &'a [Mention], tokens: &[Token], idx: usize) -> Option<&'a Mention> {
    let start = tokens[idx].byte_start;
    mentions.iter().find(|m| m.byte_start == start && is_speaker(m))
}

enum Attribution {
    Speaker(EntityId),
    VerbOnly,
    None,
}

/// `Entity verb: "…"` or `verb Entity: "…"` immediately before the quote.
fn attribute_before(tokens: &[Token], mentions: &[Mention], verbs: &HashSet<String>, lo: usize, open_tok: usize) -> Attribution {
    if open_tok == 0 || open_tok <= lo {
        return Attribution::None;
    }
    let last = open_tok - 1;
    if verbs.contains(&tokens[last].lower) {
        if last > lo {
            if let Some(m) = mention_ending_at(mentions, tokens, last - 1) {
                return Attribution::Speaker(m.entity_id);
            }
        }
        return Attribution::VerbOnly;
    }
    if let Some(m) = mention_ending_at(mentions, tokens, last) {
        let first = token_at(tokens, m.byte_start);
        if first > lo && verbs.contains(&tokens[first - 1].lower) && mention_spanning(mentions, tokens, first, last).is_some() {
            return Attribution::Speaker(m.entity_id);
        }
    }
    Attribution::None
}

/// `"…," said Entity` or `"…," Entity said`, allowing one auxiliary token
/// before the verb (`a déclaré`).
fn attribute_after(tokens: &[Token], mentions: &[Mention], verbs: &HashSet<String>, close_tok: usize, hi: usize) -> Attribution {
    let mut verb_only = false;
    for skip in 0..2 {
        let v = close_tok + skip;
        if v >= hi {
            break;
        }
        if verbs.contains(&tokens[v].lower) {
            if v + 1 < hi {
                if let Some(m) = mention_starting_at(mentions, tokens, v + 1) {
                    return Attribution::Speaker(m.entity_id);
                }
            }
            verb_only = true;
        }
    }
    if close_tok < hi {
        if let Some(m) = mention_starting_at(mentions, tokens, close_tok) {
            let after = token_at(tokens, m.byte_end);
            if tokens.get(after..(after + 2).min(hi)).unwrap_or_default().iter().any(|t| verbs.contains(&t.lower)) {
                return Attribution::Speaker(m.entity_id);
            }
        }
    }
    if verb_only {
        Attribution::VerbOnly
    } else {
        Attribution::None
    }
}

/// Extracts quotations introduced or followed by a reporting verb.
/// Quotes without an adjacent reporting verb are ignored; a verb without an
/// adjacent entity yields a quote with no speaker.
pub fn extract_quotes(article_id: ArticleId, text: &str, mentions: &[Mention], verbs: &HashSet<String>) -> QuoteExtraction {
    let tokens = text::tokenize(text);
    let (spans, unbalanced) = quote_spans(text);
    let mut quotes = Vec::new();
    for (i, span) in spans.iter().enumerate() {
        let inner = text[span.inner_start..span.inner_end].trim().trim_end_matches(',').trim_end();
        if inner.is_empty() {
            continue;
        }
        let open_tok = token_at(&tokens, span.open);
        let close_tok = token_at(&tokens, span.close_end);
        let lo = if i == 0 { 0 } else { token_at(&tokens, spans[i - 1].close_end) };
        let hi = spans.get(i + 1).map_or(tokens.len(), |n| token_at(&tokens, n.open));
        let speaker = match attribute_before(&tokens, mentions, verbs, lo, open_tok) {
            Attribution::Speaker(id) => Some(Some(id)),
            before => match (attribute_after(&tokens, mentions, verbs, close_tok, hi), before) {
                (Attribution::Speaker(id), _) => Some(Some(id)),
                (Attribution::VerbOnly, _) | (_, Attribution::VerbOnly) => Some(None),
                _ => None,
            },
        };
        let Some(speaker_entity) = speaker else { continue };
        let mentioned_entities = mentions
            .iter()
            .filter(|m| m.byte_start >= span.inner_start && m.byte_end <= span.inner_end)
            .map(|m| m.entity_id)
            .filter(|id| Some(*id) != speaker_entity)
            .collect();
        quotes.push(Quote {
            article_id,
            speaker_entity,
            text: inner.to_string(),
            mentioned_entities,
            byte_start: span.inner_start,
            byte_end: span.inner_end,
        });
    }
    QuoteExtraction { quotes, unbalanced }
}
