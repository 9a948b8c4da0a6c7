//! Country × category burst statistic: the last 24 hours against a
//! weekday-normalised two-week average.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{Store, NO_CATEGORY};
use crate::types::CountryCode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlertError {
    #[error("alerting needs {need} days of history before {before}, store starts {have:?}")]
    IncompleteHistory { need: u32, before: NaiveDate, have: Option<NaiveDate> },
    #[error("invalid alert config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlertConfig {
    pub baseline_days: u32,
    pub floor: f64,
    pub min_support: u64,
    pub medium: f64,
    pub high: f64,
}

impl Default for AlertConfig {
    fn default() -> Self {
        Self { baseline_days: 14, floor: 0.5, min_support: 2, medium: 2.0, high: 4.0 }
    }
}

impl AlertConfig {
    pub fn validate(&self) -> Result<(), AlertError> {
        let bad = |m: &str| Err(AlertError::InvalidConfig(m.to_string()));
        if self.baseline_days < 7 || self.baseline_days > 366 {
            return bad("baseline_days must be in 7..=366");
        }
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return bad("floor must be positive");
        }
        if !(self.medium > 0.0 && self.high >= self.medium && self.high.is_finite()) {
            return bad("need 0 < medium <= high");
        }
        Ok(())
    }

    pub fn level(&self, score: f64) -> AlertLevel {
        if score >= self.high {
            AlertLevel::High
        } else if score >= self.medium {
            AlertLevel::Medium
        } else {
            AlertLevel::Low
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlertLevel {
    Low,
    Medium,
    High,
}

impl AlertLevel {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlertLevel::Low => "low",
            AlertLevel::Medium => "medium",
            AlertLevel::High => "high",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertCell {
    pub country: CountryCode,
    pub category_id: String,
    pub observed_24h: u64,
    pub baseline_daily: f64,
    pub dow_factor: f64,
    pub expected: f64,
    pub score: f64,
    pub level: AlertLevel,
}

/// Weekday correction: mean global count on `weekday` over the history,
/// divided by the mean over all days. An all-zero history gives 1.0.
pub fn dow_factor(history: &[(NaiveDate, u64)], weekday: Weekday, days: u32) -> Result<f64, AlertError> {
    if history.len() < days as usize {
        return Err(AlertError::IncompleteHistory {
            need: days,
            before: history.last().map(|(d, _)| *d + Duration::days(1)).unwrap_or(NaiveDate::MIN),
            have: history.first().map(|(d, _)| *d),
        });
    }
    let total: u64 = history.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Ok(1.0);
    }
    let mean = total as f64 / history.len() as f64;
    let same: Vec<u64> = history.iter().filter(|(d, _)| d.weekday() == weekday).map(|(_, n)| *n).collect();
    if same.is_empty() {
        return Ok(1.0);
    }
    let wd_mean = same.iter().sum::<u64>() as f64 / same.len() as f64;
    Ok(wd_mean / mean)
}

/// Expected count, score and level for one cell.
pub fn alert_score(observed: u64, baseline_daily: f64, dow_factor: f64, cfg: &AlertConfig) -> (f64, f64, AlertLevel) {
    let expected = (baseline_daily * dow_factor).max(cfg.floor);
    let score = observed as f64 / expected;
    (expected, score, cfg.level(score))
}

/// Raw counts a board is computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct AlertInputs {
    pub observed: BTreeMap<(CountryCode, String), u64>,
    /// Sum of each cell's daily counts over the baseline days.
    pub baseline_totals: BTreeMap<(CountryCode, String), u64>,
    /// Global daily counts over the baseline days, ascending.
    pub global_history: Vec<(NaiveDate, u64)>,
    pub weekday: Weekday,
    pub baseline_days: u32,
}

impl AlertInputs {
    /// Every count multiplied by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        let scale = |m: &BTreeMap<(CountryCode, String), u64>| m.iter().map(|(c, n)| (c.clone(), n * k)).collect();
        Self {
            observed: scale(&self.observed),
            baseline_totals: scale(&self.baseline_totals),
            global_history: self.global_history.iter().map(|(d, n)| (*d, n * k)).collect(),
            weekday: self.weekday,
            baseline_days: self.baseline_days,
        }
    }
}

/// First day of the observation window and the weekday it is normalised to.
fn observation_anchor(clock: DateTime<Utc>) -> (NaiveDate, Weekday) {
    let start = clock - Duration::hours(24);
    (start.date_naive(), (clock - Duration::hours(12)).weekday())
}

/// Collects board inputs from the store. Observed counts cover
/// `[clock - 24h, clock)`; the baseline is the `baseline_days` calendar days
/// before the day the observation window starts.
pub fn alert_inputs(store: &Store, clock: DateTime<Utc>, cfg: &AlertConfig) -> Result<AlertInputs, AlertError> {
    cfg.validate()?;
    let (obs_day, weekday) = observation_anchor(clock);
    let first = obs_day - Duration::days(cfg.baseline_days as i64);
    let have = store.cube().first_day();
    if have.is_none_or(|d| d > first) {
        return Err(AlertError::IncompleteHistory { need: cfg.baseline_days, before: obs_day, have });
    }
    let from = clock - Duration::hours(24);
    let mut observed = BTreeMap::new();
    for r in store.records().iter().filter(|r| r.published_at >= from && r.published_at < clock) {
        for cell in r.cells() {
            *observed.entry(cell).or_insert(0) += 1;
        }
    }
    let mut baseline_totals = BTreeMap::new();
    for (k, n) in store.cube().cells().filter(|(k, _)| k.day >= first && k.day < obs_day) {
        *baseline_totals.entry((k.country, k.category.clone())).or_insert(0) += n;
    }
    let global_history = first.iter_days().take_while(|d| *d < obs_day).map(|d| (d, store.cube().global(d))).collect();
    Ok(AlertInputs { observed, baseline_totals, global_history, weekday, baseline_days: cfg.baseline_days })
}

/// Scores every cell seen in either window, in board order.
pub fn score_cells(inputs: &AlertInputs, cfg: &AlertConfig) -> Result<Vec<AlertCell>, AlertError> {
    let dow = dow_factor(&inputs.global_history, inputs.weekday, inputs.baseline_days)?;
    let keys: std::collections::BTreeSet<_> = inputs.observed.keys().chain(inputs.baseline_totals.keys()).collect();
    let mut cells: Vec<AlertCell> = keys
        .into_iter()
        .filter(|(country, category)| category != NO_CATEGORY && !country.is_unknown())
        .map(|key| {
            let observed = inputs.observed.get(key).copied().unwrap_or(0);
            let baseline_daily = inputs.baseline_totals.get(key).copied().unwrap_or(0) as f64 / inputs.baseline_days as f64;
            let (expected, score, level) = alert_score(observed, baseline_daily, dow, cfg);
            AlertCell { country: key.0, category_id: key.1.clone(), observed_24h: observed, baseline_daily, dow_factor: dow, expected, score, level }
        })
        .collect();
    cells.sort_by(board_order);
    Ok(cells)
}

/// Resolution at which scores are compared when ranking.
pub const SCORE_RESOLUTION: f64 = 1e-9;

fn score_key(score: f64) -> i64 {
    (score / SCORE_RESOLUTION).round() as i64
}

/// Score descending (at [`SCORE_RESOLUTION`]), then observed descending, country, category.
pub fn board_order(a: &AlertCell, b: &AlertCell) -> std::cmp::Ordering {
    score_key(b.score)
        .cmp(&score_key(a.score))
        .then(b.observed_24h.cmp(&a.observed_24h))
        .then(a.country.cmp(&b.country))
        .then(a.category_id.cmp(&b.category_id))
}

/// Board from precomputed inputs: scored cells meeting minimum support.
pub fn board_from_inputs(inputs: &AlertInputs, cfg: &AlertConfig) -> Result<Vec<AlertCell>, AlertError> {
    let mut cells = score_cells(inputs, cfg)?;
    cells.retain(|c| c.observed_24h >= cfg.min_support);
    Ok(cells)
}

pub fn alert_board(store: &Store, clock: DateTime<Utc>, cfg: &AlertConfig) -> Result<Vec<AlertCell>, AlertError> {
    board_from_inputs(&alert_inputs(store, clock, cfg)?, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    Day,
    Month,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Count,
    Tonality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub bucket: NaiveDate,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesQuery {
    #[serde(default)]
    pub country: Option<CountryCode>,
    #[serde(default)]
    pub category: Option<String>,
    #[serde(default)]
    pub language: Option<String>,
    pub resolution: Resolution,
    pub metric: Metric,
    pub from: NaiveDate,
    /// Inclusive.
    pub to: NaiveDate,
}

fn bucket_start(d: NaiveDate, res: Resolution) -> NaiveDate {
    match res {
        Resolution::Day => d,
        Resolution::Month => d.with_day(1).expect("day 1 exists"),
    }
}

fn next_bucket(d: NaiveDate, res: Resolution) -> NaiveDate {
    match res {
        Resolution::Day => d + Duration::days(1),
        Resolution::Month => d.checked_add_months(chrono::Months::new(1)).expect("date in range"),
    }
}

/// Article counts or mean tonality per day or month. Empty buckets are 0
/// for counts and absent for tonality.
pub fn series(store: &Store, q: &SeriesQuery) -> Vec<SeriesPoint> {
    let mut acc: BTreeMap<NaiveDate, (u64, f64)> = BTreeMap::new();
    for r in store.records() {
        let day = r.published_at.date_naive();
        if day < q.from || day > q.to {
            continue;
        }
        if q.country.is_some_and(|c| !r.alert_countries().contains(&c))
            || q.category.as_ref().is_some_and(|c| !r.categories.contains(c))
            || q.language.as_ref().is_some_and(|l| r.language != *l)
        {
            continue;
        }
        let e = acc.entry(bucket_start(day, q.resolution)).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += r.tonality;
    }
    let mut out = Vec::new();
    if q.from > q.to {
        return out;
    }
    let mut b = bucket_start(q.from, q.resolution);
    while b <= q.to {
        match (acc.get(&b), q.metric) {
            (Some((n, _)), Metric::Count) => out.push(SeriesPoint { bucket: b, value: *n as f64 }),
            (None, Metric::Count) => out.push(SeriesPoint { bucket: b, value: 0.0 }),
            (Some((n, sum)), Metric::Tonality) => out.push(SeriesPoint { bucket: b, value: sum / *n as f64 }),
            (None, Metric::Tonality) => {}
        }
        b = next_bucket(b, q.resolution);
    }
    out
}

/// CSV rendering of a board with the column order
/// `country,category,observed,expected,score,level`.
pub fn board_csv(cells: &[AlertCell]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["country", "category", "observed", "expected", "score", "level"]).expect("in-memory write");
    for c in cells {
        w.write_record([
            c.country.to_string(),
            c.category_id.clone(),
            c.observed_24h.to_string(),
            c.expected.to_string(),
            c.score.to_string(),
            c.level.as_str().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
