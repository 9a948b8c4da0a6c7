use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::record::ArticleRecord;
use crate::types::CountryCode;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CubeKey {
    pub day: NaiveDate,
    pub country: CountryCode,
    pub category: String,
    pub language: String,
}

/// Daily counts per (country, category, language) cell. `global_daily` is
/// the sum of all cells of a day.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountCube {
    counts: BTreeMap<CubeKey, u64>,
    global_daily: BTreeMap<NaiveDate, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dim {
    Day,
    Country,
    Category,
    Language,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CubeFilter {
    #[serde(default)]
    pub from: Option<NaiveDate>,
    #[serde(default)]
    pub to: Option<NaiveDate>,
    #[serde(default)]
    pub country: Option<CountryCode>,
    #[serde(default)]
    pub category: Option<String>,
    #[serde(default)]
    pub language: Option<String>,
}

impl CubeFilter {
    fn admits(&self, k: &CubeKey) -> bool {
        self.from.is_none_or(|d| k.day >= d)
            && self.to.is_none_or(|d| k.day <= d)
            && self.country.is_none_or(|c| k.country == c)
            && self.category.as_ref().is_none_or(|c| k.category == *c)
            && self.language.as_ref().is_none_or(|l| k.language == *l)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CountRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub day: Option<NaiveDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub country: Option<CountryCode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    pub count: u64,
}

impl CountCube {
    pub fn add(&mut self, r: &ArticleRecord) {
        self.apply(r, 1);
    }

    pub fn remove(&mut self, r: &ArticleRecord) {
        self.apply(r, -1);
    }

    fn apply(&mut self, r: &ArticleRecord, sign: i64) {
        let day = r.published_at.date_naive();
        for (country, category) in r.cells() {
            let key = CubeKey { day, country, category, language: r.language.clone() };
            bump(&mut self.counts, key, sign);
            bump(&mut self.global_daily, day, sign);
        }
    }

    pub fn get(&self, key: &CubeKey) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn global(&self, day: NaiveDate) -> u64 {
        self.global_daily.get(&day).copied().unwrap_or(0)
    }

    pub fn global_daily(&self) -> &BTreeMap<NaiveDate, u64> {
        &self.global_daily
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CubeKey, u64)> {
        self.counts.iter().map(|(k, v)| (k, *v))
    }

    pub fn first_day(&self) -> Option<NaiveDate> {
        self.global_daily.keys().next().copied()
    }

    /// Exact counts of cells admitted by `filter`, grouped by `dims`.
    pub fn query(&self, filter: &CubeFilter, dims: &[Dim]) -> Vec<CountRow> {
        let mut rows: BTreeMap<CountRow, u64> = BTreeMap::new();
        for (k, n) in self.counts.iter().filter(|(k, _)| filter.admits(k)) {
            let key = CountRow {
                day: dims.contains(&Dim::Day).then_some(k.day),
                country: dims.contains(&Dim::Country).then_some(k.country),
                category: dims.contains(&Dim::Category).then(|| k.category.clone()),
                language: dims.contains(&Dim::Language).then(|| k.language.clone()),
                count: 0,
            };
            *rows.entry(key).or_insert(0) += n;
        }
        rows.into_iter().map(|(mut r, n)| {
            r.count = n;
            r
        })
        .collect()
    }
}

fn bump<K: Ord>(m: &mut BTreeMap<K, u64>, k: K, sign: i64) {
    let e = m.entry(k).or_insert(0);
    *e = e.saturating_add_signed(sign);
    if *e == 0 {
        m.retain(|_, v| *v > 0);
    }
}
