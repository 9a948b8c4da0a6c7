//! Channels: declarative article selections combined by union and
//! intersection, grouped into named sets, with client-side notification
//! scheduling.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::top_stories;
use crate::store::{ArticleRecord, Facet, SearchQuery, Store};
use crate::types::{ArticleId, CountryCode, EntityId};

pub const MAX_DEPTH: usize = 8;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("malformed channel expression: {0}")]
    MalformedExpr(String),
    #[error("duplicate channel name {0:?} in set {1:?}")]
    DuplicateName(String, String),
    #[error("invalid profile name {0:?}")]
    InvalidProfile(String),
    #[error("profile {0:?} not found")]
    UnknownProfile(String),
    #[error("threshold must be at least 1")]
    ZeroThreshold,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A channel definition. Serialised with a `kind` tag, e.g.
/// `{"kind":"intersection","of":[{"kind":"category","id":"flood"},{"kind":"language","language":"en"}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelExpr {
    Category { id: String },
    TopStories { language: String, n: usize },
    CountrySource { country: CountryCode },
    CountryAbout { country: CountryCode },
    Entity { id: EntityId },
    Language { language: String },
    Search { terms: String },
    Union { of: Vec<ChannelExpr> },
    Intersection { of: Vec<ChannelExpr> },
}

impl ChannelExpr {
    pub fn depth(&self) -> usize {
        match self {
            ChannelExpr::Union { of } | ChannelExpr::Intersection { of } => 1 + of.iter().map(Self::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.depth() > MAX_DEPTH {
            return Err(ChannelError::MalformedExpr(format!("nesting deeper than {MAX_DEPTH}")));
        }
        self.validate_nodes()
    }

    fn validate_nodes(&self) -> Result<(), ChannelError> {
        match self {
            ChannelExpr::Union { of } | ChannelExpr::Intersection { of } => {
                if of.is_empty() {
                    return Err(ChannelError::MalformedExpr("empty union or intersection".into()));
                }
                of.iter().try_for_each(Self::validate_nodes)
            }
            ChannelExpr::TopStories { n: 0, .. } => Err(ChannelError::MalformedExpr("top_stories n must be positive".into())),
            ChannelExpr::Search { terms } if crate::text::words(terms).is_empty() => {
                Err(ChannelError::MalformedExpr("search needs at least one term".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn from_json(json: &str) -> Result<Self, ChannelError> {
        let e: Self = serde_json::from_str(json).map_err(|e| ChannelError::MalformedExpr(e.to_string()))?;
        e.validate()?;
        Ok(e)
    }

    /// Whether `r` satisfies a leaf or composite predicate. `top` holds the
    /// cluster ids selected by each top-stories leaf.
    fn matches(&self, r: &ArticleRecord, top: &BTreeMap<(String, usize), BTreeSet<u64>>) -> bool {
        match self {
            ChannelExpr::Category { id } => r.categories.contains(id),
            ChannelExpr::TopStories { language, n } => {
                r.cluster_id.is_some_and(|c| top.get(&(language.clone(), *n)).is_some_and(|s| s.contains(&c)))
            }
            ChannelExpr::CountrySource { country } => r.country_of_source == *country,
            ChannelExpr::CountryAbout { country } => r.countries_about.contains(country),
            ChannelExpr::Entity { id } => r.entity_ids.contains(id),
            ChannelExpr::Language { language } => r.language == *language,
            ChannelExpr::Search { terms } => SearchQuery::terms(terms).matches(r),
            ChannelExpr::Union { of } => of.iter().any(|e| e.matches(r, top)),
            ChannelExpr::Intersection { of } => of.iter().all(|e| e.matches(r, top)),
        }
    }
}

fn top_cluster_ids(store: &Store, language: &str, n: usize) -> BTreeSet<u64> {
    top_stories(store.clusters(), language, n).into_iter().map(|c| c.id).collect()
}

fn eval_set(expr: &ChannelExpr, store: &Store) -> BTreeSet<ArticleId> {
    match expr {
        ChannelExpr::Category { id } => store.facet_ids(Facet::Category(id)),
        ChannelExpr::TopStories { language, n } => top_cluster_ids(store, language, *n)
            .into_iter()
            .flat_map(|c| store.facet_ids(Facet::Cluster(c)))
            .collect(),
        ChannelExpr::CountrySource { country } => store.facet_ids(Facet::CountrySource(*country)),
        ChannelExpr::CountryAbout { country } => store.facet_ids(Facet::CountryAbout(*country)),
        ChannelExpr::Entity { id } => store.facet_ids(Facet::Entity(*id)),
        ChannelExpr::Language { language } => store.facet_ids(Facet::Language(language)),
        ChannelExpr::Search { terms } => store.search_ids(&SearchQuery::terms(terms)),
        ChannelExpr::Union { of } => of.iter().flat_map(|e| eval_set(e, store)).collect(),
        ChannelExpr::Intersection { of } => {
            let mut sets: Vec<_> = of.iter().map(|e| eval_set(e, store)).collect();
            sets.sort_by_key(BTreeSet::len);
            let mut iter = sets.into_iter();
            let first = iter.next().unwrap_or_default();
            iter.fold(first, |acc, s| acc.intersection(&s).copied().collect())
        }
    }
}

/// Article ids in the channel, newest first, ties by id. With a clock,
/// articles published after it are excluded.
pub fn evaluate(expr: &ChannelExpr, store: &Store, clock: Option<DateTime<Utc>>) -> Result<Vec<ArticleId>, ChannelError> {
    expr.validate()?;
    let mut ids = eval_set(expr, store);
    if let Some(clock) = clock {
        ids.retain(|id| store.get(*id).is_some_and(|r| r.published_at <= clock));
    }
    Ok(store.in_recency_order(&ids).into_iter().map(|r| r.id).collect())
}

/// Reference evaluation by scanning every record. Used to cross-check
/// [`evaluate`].
pub fn evaluate_by_scan(expr: &ChannelExpr, store: &Store, clock: Option<DateTime<Utc>>) -> Result<Vec<ArticleId>, ChannelError> {
    expr.validate()?;
    let mut top = BTreeMap::new();
    collect_top(expr, store, &mut top);
    let ids: BTreeSet<_> = store
        .records()
        .iter()
        .filter(|r| clock.is_none_or(|c| r.published_at <= c) && expr.matches(r, &top))
        .map(|r| r.id)
        .collect();
    Ok(store.in_recency_order(&ids).into_iter().map(|r| r.id).collect())
}

fn collect_top(expr: &ChannelExpr, store: &Store, out: &mut BTreeMap<(String, usize), BTreeSet<u64>>) {
    match expr {
        ChannelExpr::TopStories { language, n } => {
            out.entry((language.clone(), *n)).or_insert_with(|| top_cluster_ids(store, language, *n));
        }
        ChannelExpr::Union { of } | ChannelExpr::Intersection { of } => of.iter().for_each(|e| collect_top(e, store, out)),
        _ => {}
    }
}

/// Number of channel articles published in `[since, clock)`.
pub fn channel_delta(expr: &ChannelExpr, store: &Store, since: DateTime<Utc>, clock: DateTime<Utc>) -> Result<usize, ChannelError> {
    expr.validate()?;
    Ok(eval_set(expr, store)
        .into_iter()
        .filter_map(|id| store.get(id))
        .filter(|r| r.published_at >= since && r.published_at < clock)
        .count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetCount<K> {
    pub key: K,
    pub count: u64,
    pub share: f64,
}

/// Metadata summary over a channel's articles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelFacets {
    pub total: usize,
    pub categories: Vec<FacetCount<String>>,
    pub entities: Vec<FacetCount<EntityId>>,
    pub source_countries: Vec<FacetCount<CountryCode>>,
    pub about_countries: Vec<FacetCount<CountryCode>>,
}

/// Counts sorted descending, ties by key; shares relative to the number
/// of articles.
fn histogram<K: Ord + Clone>(counts: BTreeMap<K, u64>, total: usize) -> Vec<FacetCount<K>> {
    let mut v: Vec<_> = counts
        .into_iter()
        .map(|(key, count)| FacetCount { key, count, share: count as f64 / total as f64 })
        .collect();
    v.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
    v
}

pub fn channel_metadata(ids: &[ArticleId], store: &Store) -> ChannelFacets {
    let mut cats = BTreeMap::new();
    let mut ents = BTreeMap::new();
    let mut src = BTreeMap::new();
    let mut about = BTreeMap::new();
    let records: Vec<_> = ids.iter().filter_map(|id| store.get(*id)).collect();
    for r in &records {
        for c in &r.categories {
            *cats.entry(c.clone()).or_insert(0) += 1;
        }
        for e in &r.entity_ids {
            *ents.entry(*e).or_insert(0) += 1;
        }
        *src.entry(r.country_of_source).or_insert(0) += 1;
        for c in &r.countries_about {
            *about.entry(*c).or_insert(0) += 1;
        }
    }
    let n = records.len();
    ChannelFacets {
        total: n,
        categories: histogram(cats, n),
        entities: histogram(ents, n),
        source_countries: histogram(src, n),
        about_countries: histogram(about, n),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedChannel {
    pub name: String,
    pub expr: ChannelExpr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub name: String,
    pub channels: Vec<NamedChannel>,
}

impl ChannelSet {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string(), channels: Vec::new() }
    }

    pub fn add(&mut self, name: &str, expr: ChannelExpr) -> Result<(), ChannelError> {
        expr.validate()?;
        if self.get(name).is_some() {
            return Err(ChannelError::DuplicateName(name.to_string(), self.name.clone()));
        }
        self.channels.push(NamedChannel { name: name.to_string(), expr });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ChannelExpr> {
        self.channels.iter().find(|c| c.name == name).map(|c| &c.expr)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let mut seen = BTreeSet::new();
        for c in &self.channels {
            if !seen.insert(c.name.as_str()) {
                return Err(ChannelError::DuplicateName(c.name.clone(), self.name.clone()));
            }
            c.expr.validate()?;
        }
        Ok(())
    }
}

/// Channel sets saved as one JSON document per profile name.
#[derive(Debug, Clone)]
pub struct ProfileStore {
    dir: PathBuf,
}

impl ProfileStore {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        Self { dir: dir.as_ref().to_path_buf() }
    }

    fn path(&self, profile: &str) -> Result<PathBuf, ChannelError> {
        let ok = !profile.is_empty()
            && profile.len() <= 64
            && profile.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !ok {
            return Err(ChannelError::InvalidProfile(profile.to_string()));
        }
        Ok(self.dir.join(format!("{profile}.json")))
    }

    pub fn load(&self, profile: &str) -> Result<Vec<ChannelSet>, ChannelError> {
        let path = self.path(profile)?;
        if !path.exists() {
            return Err(ChannelError::UnknownProfile(profile.to_string()));
        }
        let sets: Vec<ChannelSet> = serde_json::from_str(&fs::read_to_string(path)?)?;
        sets.iter().try_for_each(ChannelSet::validate)?;
        Ok(sets)
    }

    pub fn save(&self, profile: &str, sets: &[ChannelSet]) -> Result<(), ChannelError> {
        let path = self.path(profile)?;
        sets.iter().try_for_each(ChannelSet::validate)?;
        fs::create_dir_all(&self.dir)?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_string_pretty(sets)?)?;
        fs::rename(tmp, path)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuietHours {
    pub start: NaiveTime,
    pub end: NaiveTime,
}

impl QuietHours {
    /// Whether local time `t` is inside the range. Ranges may wrap midnight.
    pub fn contains(&self, t: NaiveTime) -> bool {
        if self.start <= self.end {
            t >= self.start && t < self.end
        } else {
            t >= self.start || t < self.end
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotificationPolicy {
    pub threshold: usize,
    #[serde(default)]
    pub quiet_hours: Option<QuietHours>,
    #[serde(default = "default_session_delay")]
    pub session_delay_secs: i64,
    /// Offset of the user's local time from UTC.
    #[serde(default)]
    pub utc_offset_secs: i32,
}

fn default_session_delay() -> i64 {
    120
}

impl Default for NotificationPolicy {
    fn default() -> Self {
        Self { threshold: 1, quiet_hours: None, session_delay_secs: default_session_delay(), utc_offset_secs: 0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UserState {
    pub session_started_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "at", rename_all = "snake_case")]
pub enum Decision {
    None,
    DeliverNow,
    DeferUntil(DateTime<Utc>),
}

impl NotificationPolicy {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.threshold == 0 {
            return Err(ChannelError::ZeroThreshold);
        }
        Ok(())
    }

    /// End of the quiet period containing `clock`, if any.
    fn quiet_until(&self, clock: DateTime<Utc>) -> Option<DateTime<Utc>> {
        let q = self.quiet_hours.as_ref()?;
        let offset = Duration::seconds(self.utc_offset_secs as i64);
        let local = clock.naive_utc() + offset;
        if !q.contains(local.time()) {
            return None;
        }
        let mut end = local.date().and_time(q.end);
        if end <= local {
            end += Duration::days(1);
        }
        Some((end - offset).and_utc())
    }
}

/// Delivery decision for `delta` new channel articles at `clock`.
pub fn notification_due(policy: &NotificationPolicy, delta: usize, user: &UserState, clock: DateTime<Utc>) -> Decision {
    if delta < policy.threshold.max(1) {
        return Decision::None;
    }
    if let Some(end) = policy.quiet_until(clock) {
        return Decision::DeferUntil(end);
    }
    if let Some(start) = user.session_started_at {
        let ready = start + Duration::seconds(policy.session_delay_secs);
        if start <= clock && clock < ready {
            return Decision::DeferUntil(ready);
        }
    }
    Decision::DeliverNow
}

/// Per-user notification state. Triggers arriving while a delivery is
/// deferred coalesce into that one delivery.
#[derive(Debug, Clone, Default)]
pub struct Notifier {
    pub policy: NotificationPolicy,
    pending: Option<(DateTime<Utc>, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub at: DateTime<Utc>,
    /// New articles accumulated since the last delivery.
    pub articles: usize,
}

impl Notifier {
    pub fn new(policy: NotificationPolicy) -> Self {
        Self { policy, pending: None }
    }

    pub fn pending(&self) -> Option<DateTime<Utc>> {
        self.pending.map(|(t, _)| t)
    }

    /// Feeds one check result. Returns a delivery when one is due now.
    pub fn check(&mut self, delta: usize, user: &UserState, clock: DateTime<Utc>) -> Option<Delivery> {
        if let Some((until, acc)) = self.pending {
            let acc = acc + delta;
            if clock >= until {
                self.pending = None;
                return Some(Delivery { at: clock, articles: acc });
            }
            self.pending = Some((until, acc));
            return None;
        }
        match notification_due(&self.policy, delta, user, clock) {
            Decision::None => None,
            Decision::DeliverNow => Some(Delivery { at: clock, articles: delta }),
            Decision::DeferUntil(t) => {
                self.pending = Some((t, delta));
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at(h: u32, m: u32, s: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 6, 1, h, m, s).unwrap()
    }

    fn night() -> NotificationPolicy {
        NotificationPolicy {
            threshold: 3,
            quiet_hours: Some(QuietHours { start: NaiveTime::from_hms_opt(23, 0, 0).unwrap(), end: NaiveTime::from_hms_opt(7, 0, 0).unwrap() }),
            ..Default::default()
        }
    }

    #[test]
    fn json_round_trip() {
        let e = ChannelExpr::Intersection {
            of: vec![
                ChannelExpr::Category { id: "flood".into() },
                ChannelExpr::Union { of: vec![ChannelExpr::Language { language: "en".into() }, ChannelExpr::Entity { id: 4 }] },
                ChannelExpr::TopStories { language: "de".into(), n: 10 },
            ],
        };
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(ChannelExpr::from_json(&json).unwrap(), e);
        assert!(json.starts_with(r#"{"kind":"intersection","of":[{"kind":"category","id":"flood"}"#));
    }

    #[test]
    fn malformed_rejected() {
        assert!(ChannelExpr::from_json(r#"{"kind":"union","of":[]}"#).is_err());
        assert!(ChannelExpr::from_json(r#"{"kind":"nope"}"#).is_err());
        let mut deep = ChannelExpr::Language { language: "en".into() };
        for _ in 0..MAX_DEPTH {
            deep = ChannelExpr::Union { of: vec![deep] };
        }
        assert!(deep.validate().is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut set = ChannelSet::new("mine");
        set.add("a", ChannelExpr::Entity { id: 1 }).unwrap();
        assert!(set.add("a", ChannelExpr::Entity { id: 2 }).is_err());
    }

    #[test]
    fn profiles_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ps = ProfileStore::new(dir.path());
        let mut set = ChannelSet::new("health");
        set.add("flu", ChannelExpr::Category { id: "influenza".into() }).unwrap();
        ps.save("analyst_1", &[set.clone()]).unwrap();
        assert_eq!(ps.load("analyst_1").unwrap(), vec![set]);
        assert!(matches!(ps.load("../etc"), Err(ChannelError::InvalidProfile(_))));
        assert!(matches!(ps.load("nobody"), Err(ChannelError::UnknownProfile(_))));
    }

    #[test]
    fn notification_examples() {
        let p = night();
        let idle = UserState::default();
        assert_eq!(notification_due(&p, 0, &idle, at(12, 0, 0)), Decision::None);
        assert_eq!(notification_due(&p, 5, &idle, at(3, 0, 0)), Decision::DeferUntil(at(7, 0, 0)));
        assert_eq!(notification_due(&p, 5, &idle, at(12, 0, 0)), Decision::DeliverNow);
        let session = UserState { session_started_at: Some(at(12, 0, 0)) };
        assert_eq!(notification_due(&p, 5, &session, at(12, 1, 0)), Decision::DeferUntil(at(12, 2, 0)));
    }

    #[test]
    fn quiet_hours_with_offset() {
        let p = NotificationPolicy { utc_offset_secs: 2 * 3600, ..night() };
        // 22:30 UTC is 00:30 local; quiet ends 07:00 local = 05:00 UTC.
        let t = Utc.with_ymd_and_hms(2024, 5, 31, 22, 30, 0).unwrap();
        assert_eq!(notification_due(&p, 3, &UserState::default(), t), Decision::DeferUntil(at(5, 0, 0)));
    }

    #[test]
    fn deferred_triggers_coalesce() {
        let mut n = Notifier::new(night());
        let idle = UserState::default();
        for h in [0, 1, 2, 3] {
            assert_eq!(n.check(4, &idle, at(h, 0, 0)), None);
        }
        assert_eq!(n.pending(), Some(at(7, 0, 0)));
        assert_eq!(n.check(0, &idle, at(7, 0, 0)), Some(Delivery { at: at(7, 0, 0), articles: 16 }));
        assert_eq!(n.check(0, &idle, at(7, 10, 0)), None);
    }
}
