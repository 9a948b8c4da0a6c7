//! Reference implementations for integration and acceptance tests. Each one
//! recomputes a result by brute force from raw records or vectors.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, TimeZone, Utc};
use newswatch_core::channels::ChannelExpr;
use newswatch_core::clustering::{ClusterKind, DocVector, SparseVector};
use newswatch_core::linguistic::{geotag, recognize_entities, Gazetteer, ToponymGazetteer};
use newswatch_core::store::SearchQuery;
use newswatch_core::synthetic::SEARCH_VOCAB;
use newswatch_core::{ArticleId, ArticleRecord, CountryCode, Store};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::Deserialize;

// ---------------------------------------------------------------------------
// search and channels

pub fn words(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

pub fn recency(store: &Store, ids: impl IntoIterator<Item = ArticleId>) -> Vec<ArticleId> {
    let mut v: Vec<&ArticleRecord> = ids.into_iter().map(|id| store.get(id).unwrap()).collect();
    v.sort_by(|a, b| b.published_at.cmp(&a.published_at).then(a.id.cmp(&b.id)));
    v.into_iter().map(|r| r.id).collect()
}

pub fn scan_search(store: &Store, q: &SearchQuery) -> Vec<ArticleId> {
    let hits = store.records().iter().filter(|r| {
        let text = words(&format!("{} {}", r.title, r.snippet));
        q.terms.iter().flat_map(|t| words(t)).all(|w| text.contains(&w))
            && q.language.as_ref().is_none_or(|l| &r.language == l)
            && q.country_source.is_none_or(|c| r.country_of_source == c)
            && q.country_about.is_none_or(|c| r.countries_about.contains(&c))
            && q.category.as_ref().is_none_or(|c| r.categories.contains(c))
            && q.entity.is_none_or(|e| r.entity_ids.contains(&e))
            && q.from.is_none_or(|t| r.published_at >= t)
            && q.to.is_none_or(|t| r.published_at < t)
    });
    recency(store, hits.map(|r| r.id))
}

pub fn cc(s: &str) -> CountryCode {
    s.parse().unwrap()
}

/// Conjunctive queries of one or two terms plus random facet filters, over
/// the vocabulary and date range of `synthetic::random_store`.
pub fn random_query(r: &mut impl Rng) -> SearchQuery {
    let t0 = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let k = r.random_range(1..=2);
    let mut q = SearchQuery {
        terms: (0..k).map(|_| SEARCH_VOCAB.choose(r).unwrap().to_string()).collect(),
        ..SearchQuery::default()
    };
    if r.random_bool(0.3) {
        q.language = Some(["en", "de", "fr", "es", "it"].choose(r).unwrap().to_string());
    }
    if r.random_bool(0.2) {
        q.country_source = Some(cc(["FR", "DE", "GB", "PL"].choose(r).unwrap()));
    }
    if r.random_bool(0.2) {
        q.country_about = Some(cc(["FR", "DE", "US", "KE"].choose(r).unwrap()));
    }
    if r.random_bool(0.2) {
        q.category = Some(["flood", "health", "sport"].choose(r).unwrap().to_string());
    }
    if r.random_bool(0.15) {
        q.entity = Some(r.random_range(1..=20));
    }
    if r.random_bool(0.3) {
        let a = t0 + Duration::days(r.random_range(0..30));
        q.from = Some(a);
        q.to = Some(a + Duration::days(r.random_range(1..10)));
    }
    q
}

/// Clusters selected by a top-stories leaf, computed from cluster metadata.
pub fn top_members(store: &Store, language: &str, n: usize) -> BTreeSet<ArticleId> {
    let mut live: Vec<_> = store
        .clusters()
        .filter(|c| c.live && c.kind == ClusterKind::Window && c.language == language)
        .collect();
    live.sort_by(|a, b| b.size().cmp(&a.size()).then(a.window_start.cmp(&b.window_start)).then(a.id.cmp(&b.id)));
    live.into_iter().take(n).flat_map(|c| c.member_ids.iter().copied()).collect()
}

pub fn scan_channel(expr: &ChannelExpr, store: &Store, r: &ArticleRecord) -> bool {
    match expr {
        ChannelExpr::Category { id } => r.categories.contains(id),
        ChannelExpr::TopStories { language, n } => top_members(store, language, *n).contains(&r.id),
        ChannelExpr::CountrySource { country } => r.country_of_source == *country,
        ChannelExpr::CountryAbout { country } => r.countries_about.contains(country),
        ChannelExpr::Entity { id } => r.entity_ids.contains(id),
        ChannelExpr::Language { language } => r.language == *language,
        ChannelExpr::Search { terms } => {
            let text = words(&format!("{} {}", r.title, r.snippet));
            words(terms).iter().all(|w| text.contains(w))
        }
        ChannelExpr::Union { of } => of.iter().any(|e| scan_channel(e, store, r)),
        ChannelExpr::Intersection { of } => of.iter().all(|e| scan_channel(e, store, r)),
    }
}

pub fn scan(expr: &ChannelExpr, store: &Store, clock: Option<DateTime<Utc>>) -> Vec<ArticleId> {
    let hits = store
        .records()
        .iter()
        .filter(|r| clock.is_none_or(|c| r.published_at <= c) && scan_channel(expr, store, r))
        .map(|r| r.id);
    recency(store, hits)
}

// ---------------------------------------------------------------------------
// medoids

pub const VOCAB: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

pub fn unit(id: ArticleId, weights: &[u8]) -> DocVector {
    let norm = weights.iter().map(|w| (*w as f64).powi(2)).sum::<f64>().sqrt();
    let map: BTreeMap<String, f64> = VOCAB
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0)
        .map(|(t, w)| (t.to_string(), *w as f64 / norm))
        .collect();
    DocVector { article_id: id, weights: SparseVector::from_map(map) }
}

fn dense(v: &DocVector) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (i, t) in VOCAB.iter().enumerate() {
        out[i] = v.weights.get(t).unwrap_or(0.0);
    }
    out
}

/// Best cosine to the mean vector; near ties by (published, id).
pub fn medoid_oracle(members: &[(DocVector, DateTime<Utc>)]) -> ArticleId {
    let mut c = [0.0; 6];
    for (v, _) in members {
        for (ci, x) in c.iter_mut().zip(dense(v)) {
            *ci += x / members.len() as f64;
        }
    }
    let cn = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cos = |v: &DocVector| {
        let d = dense(v);
        let dn = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if cn == 0.0 || dn == 0.0 {
            0.0
        } else {
            d.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / (cn * dn)
        }
    };
    let best = members.iter().map(|(v, _)| cos(v)).fold(f64::MIN, f64::max);
    members
        .iter()
        .filter(|(v, _)| best - cos(v) <= 1e-12)
        .map(|(v, t)| (*t, v.article_id))
        .min()
        .unwrap()
        .1
}

/// A cluster of 1..=20 members over a small weight alphabet, so exact ties
/// and duplicate vectors are common.
pub fn random_members(r: &mut impl Rng) -> Vec<(DocVector, DateTime<Utc>)> {
    let t0 = Utc.with_ymd_and_hms(2024, 5, 1, 0, 0, 0).unwrap();
    let n = r.random_range(1..=20);
    (0..n)
        .map(|i| {
            let w: Vec<u8> = loop {
                let w: Vec<u8> = (0..6).map(|_| r.random_range(0..3)).collect();
                if w.iter().any(|x| *x > 0) {
                    break w;
                }
            };
            (unit(100 - i as u64, &w), t0 + Duration::hours(r.random_range(0..4)))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// geotagging

#[derive(Debug, Deserialize)]
pub struct Case {
    pub rule: String,
    pub text: String,
    pub source_country: CountryCode,
    pub expect: Vec<u64>,
}

pub fn homograph_fixtures() -> (Gazetteer, ToponymGazetteer, Vec<Case>) {
    let people = Gazetteer::from_jsonl(include_str!("../fixtures/homograph_entities.jsonl")).unwrap();
    let places = ToponymGazetteer::from_jsonl(include_str!("../fixtures/homograph_toponyms.jsonl")).unwrap();
    let cases = include_str!("../fixtures/homograph_cases.jsonl")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    (people, places, cases)
}

pub fn resolve(text: &str, country: CountryCode, people: &Gazetteer, places: &ToponymGazetteer) -> Vec<u64> {
    let mentions = recognize_entities(text, people);
    geotag(text, &mentions, places, country).into_iter().map(|g| g.toponym_id).collect()
}

/// Descriptions of the homograph cases that resolve differently than expected.
pub fn homograph_failures() -> Vec<String> {
    let (people, places, cases) = homograph_fixtures();
    cases
        .iter()
        .filter_map(|c| {
            let got = resolve(&c.text, c.source_country, &people, &places);
            (got != c.expect).then(|| format!("[{}] {:?} ({}) expected {:?}, got {:?}", c.rule, c.text, c.source_country, c.expect, got))
        })
        .collect()
}
