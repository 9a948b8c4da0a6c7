use std::collections::{BTreeMap, HashMap, HashSet};

use crate::text;
use crate::types::ArticleId;

/// Sparse term-weight vector with entries sorted by term.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(String, f64)>,
}

impl SparseVector {
    pub fn from_map(map: BTreeMap<String, f64>) -> Self {
        Self { entries: map.into_iter().filter(|(_, w)| *w != 0.0).collect() }
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn get(&self, term: &str) -> Option<f64> {
        self.entries
            .binary_search_by(|(t, _)| t.as_str().cmp(term))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut sum) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    pub fn cosine(&self, other: &SparseVector) -> f64 {
        let n = self.norm() * other.norm();
        if n == 0.0 {
            0.0
        } else {
            self.dot(other) / n
        }
    }

    /// Component-wise sum of `vectors`, accumulated in slice order.
    pub fn sum<'a>(vectors: impl IntoIterator<Item = &'a SparseVector>) -> SparseVector {
        let mut acc: BTreeMap<String, f64> = BTreeMap::new();
        for v in vectors {
            for (t, w) in &v.entries {
                *acc.entry(t.clone()).or_insert(0.0) += w;
            }
        }
        Self::from_map(acc)
    }

    pub fn scaled(mut self, k: f64) -> SparseVector {
        self.entries.iter_mut().for_each(|(_, w)| *w *= k);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocVector {
    pub article_id: ArticleId,
    /// log-TF × IDF weights, L2-normalised.
    pub weights: SparseVector,
}

/// Term frequencies of one document after stopword removal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermDoc {
    pub article_id: ArticleId,
    pub term_counts: BTreeMap<String, u32>,
}

/// Counts alphabetic, non-stopword tokens of `text`.
pub fn term_counts(text: &str, stopwords: Option<&HashSet<String>>) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for w in text::words(text) {
        if !w.chars().any(char::is_alphabetic) || stopwords.is_some_and(|s| s.contains(&w)) {
            continue;
        }
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vectorized {
    pub vectors: Vec<DocVector>,
    /// Documents with no terms left after stopword removal.
    pub excluded: Vec<ArticleId>,
}

/// Weights each term by `(1 + ln tf) * (1 + ln(N / df))` over the window's
/// non-empty documents and normalises to unit length.
pub fn vectorize(docs: &[TermDoc]) -> Vectorized {
    let mut out = Vectorized::default();
    let live: Vec<&TermDoc> = docs
        .iter()
        .filter(|d| {
            let empty = d.term_counts.is_empty();
            if empty {
                tracing::warn!(article = d.article_id, "empty vocabulary, excluded from clustering");
                out.excluded.push(d.article_id);
            }
            !empty
        })
        .collect();
    let n = live.len() as f64;
    let mut df: HashMap<&str, usize> = HashMap::new();
    for d in &live {
        for t in d.term_counts.keys() {
            *df.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    for d in live {
        let raw: BTreeMap<String, f64> = d
            .term_counts
            .iter()
            .map(|(t, tf)| {
                let idf = 1.0 + (n / df[t.as_str()] as f64).ln();
                (t.clone(), (1.0 + f64::from(*tf).ln()) * idf)
            })
            .collect();
        let v = SparseVector::from_map(raw);
        let norm = v.norm();
        out.vectors.push(DocVector { article_id: d.article_id, weights: v.scaled(1.0 / norm) });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: ArticleId, text: &str) -> TermDoc {
        TermDoc { article_id: id, term_counts: term_counts(text, None) }
    }

    #[test]
    fn single_document_is_log_tf() {
        let v = vectorize(&[doc(1, "storm storm coast")]);
        let w = &v.vectors[0].weights;
        let storm = 1.0 + 2f64.ln();
        let norm = (storm * storm + 1.0).sqrt();
        assert!((w.get("storm").unwrap() - storm / norm).abs() < 1e-12);
        assert!((w.get("coast").unwrap() - 1.0 / norm).abs() < 1e-12);
    }

    #[test]
    fn identical_docs_identical_vectors() {
        let v = vectorize(&[doc(1, "flood warning north"), doc(2, "flood warning north")]);
        assert_eq!(v.vectors[0].weights, v.vectors[1].weights);
        assert!((v.vectors[0].weights.cosine(&v.vectors[1].weights) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_stopwords_excluded() {
        let stop: HashSet<String> = ["the", "and"].iter().map(|s| s.to_string()).collect();
        let d = TermDoc { article_id: 3, term_counts: term_counts("the and the", Some(&stop)) };
        let v = vectorize(&[d, doc(4, "real words")]);
        assert_eq!(v.excluded, vec![3]);
        assert_eq!(v.vectors.len(), 1);
    }

    #[test]
    fn unit_norm() {
        let v = vectorize(&[doc(1, "a b c c"), doc(2, "c d e"), doc(3, "x")]);
        for d in &v.vectors {
            assert!((d.weights.norm() - 1.0).abs() < 1e-9);
        }
    }
}
