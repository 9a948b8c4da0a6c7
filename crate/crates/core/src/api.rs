//! Response documents shared by the CLI and the HTTP service. Both
//! interfaces call these builders on the same [`Snapshot`], so their answers
//! agree by construction.
//!
//! List responses are [`Page`]s with a documented sort key. Aggregates carry
//! an `articles` link to the query that returns their underlying records.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use url::form_urlencoded;

use crate::alerting::{self, AlertCell, AlertConfig, Metric, Resolution, SeriesPoint, SeriesQuery};
use crate::channels::{self, ChannelExpr, ChannelFacets};
use crate::clustering::{top_stories, Cluster, ClusterKind, SizePoint, Story};
use crate::error::{Error, Result};
use crate::export::{self, MapFilter, MapPoint};
use crate::graphs::{
    associated_entities, distribution_report, ego_graph, quote_graph, related_entities, AssociatedEntity,
    CooccurrenceIndex, Dimension, DistributionRow, NodeLinkGraph, RelatedEntity, DEFAULT_NEIGHBOURS,
};
use crate::linguistic::{Entity, LinguisticResources};
use crate::store::{ArticleRecord, SearchQuery, Store, StoredQuote};
use crate::types::{ArticleId, ClusterId, CountryCode, EntityId, StoryId, ToponymId};

pub const DEFAULT_LIMIT: usize = 100;
pub const MAX_LIMIT: usize = 1000;
pub const DEFAULT_TOP_N: usize = 10;
pub const LATEST_CLUSTERS: usize = 10;
pub const LATEST_QUOTES: usize = 20;

pub const SORT_RECENCY: &str = "published_at desc, id asc";
pub const SORT_BOARD: &str = "score desc, observed desc, country asc, category asc";
pub const SORT_TOP: &str = "size desc, window_start asc, id asc";

/// Serialises with object keys sorted at every level and no whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    fn sort(v: Value) -> Value {
        match v {
            Value::Object(map) => {
                let sorted: BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, sort(v))).collect();
                Value::Object(sorted.into_iter().collect())
            }
            Value::Array(a) => Value::Array(a.into_iter().map(sort).collect()),
            other => other,
        }
    }
    Ok(serde_json::to_string(&sort(serde_json::to_value(value)?))?)
}

/// Midnight after the most recent publication day, or the epoch for an
/// empty store.
pub fn default_clock(store: &Store) -> DateTime<Utc> {
    match store.latest_published() {
        Some(t) => {
            let next = t.date_naive() + Duration::days(1);
            Utc.from_utc_datetime(&next.and_hms_opt(0, 0, 0).expect("midnight exists"))
        }
        None => DateTime::UNIX_EPOCH,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paging {
    #[serde(default)]
    pub offset: Option<usize>,
    #[serde(default)]
    pub limit: Option<usize>,
}

impl Paging {
    pub fn new(offset: usize, limit: usize) -> Self {
        Self { offset: Some(offset), limit: Some(limit) }
    }

    pub fn page<T>(self, items: Vec<T>, sort: &str) -> Page<T> {
        let offset = self.offset.unwrap_or(0);
        let limit = self.limit.unwrap_or(DEFAULT_LIMIT).clamp(1, MAX_LIMIT);
        let total = items.len();
        let items = items.into_iter().skip(offset).take(limit).collect();
        Page { items, total, offset, limit, sort: sort.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub sort: String,
}

fn query_string<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut s = form_urlencoded::Serializer::new(String::new());
    for (k, v) in pairs {
        s.append_pair(k, &v);
    }
    s.finish()
}

pub fn cluster_articles_href(id: ClusterId) -> String {
    export::cluster_articles_href(id)
}

/// Flat search parameters as accepted on the command line and in query
/// strings. `q` holds whitespace-separated terms that must all match.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchParams {
    #[serde(default)]
    pub q: Option<String>,
    #[serde(default)]
    pub lang: Option<String>,
    #[serde(default)]
    pub country_source: Option<CountryCode>,
    #[serde(default)]
    pub country_about: Option<CountryCode>,
    #[serde(default)]
    pub category: Option<String>,
    #[serde(default)]
    pub entity: Option<EntityId>,
    #[serde(default)]
    pub from: Option<DateTime<Utc>>,
    /// Exclusive.
    #[serde(default)]
    pub to: Option<DateTime<Utc>>,
}

impl SearchParams {
    pub fn query(&self) -> SearchQuery {
        SearchQuery {
            terms: self.q.iter().flat_map(|q| q.split_whitespace().map(str::to_string)).collect(),
            language: self.lang.clone(),
            country_source: self.country_source,
            country_about: self.country_about,
            category: self.category.clone(),
            entity: self.entity,
            from: self.from,
            to: self.to,
        }
    }

    pub fn href(&self) -> String {
        let mut pairs = Vec::new();
        if let Some(q) = &self.q {
            pairs.push(("q", q.clone()));
        }
        if let Some(l) = &self.lang {
            pairs.push(("lang", l.clone()));
        }
        if let Some(c) = self.country_source {
            pairs.push(("country_source", c.to_string()));
        }
        if let Some(c) = self.country_about {
            pairs.push(("country_about", c.to_string()));
        }
        if let Some(c) = &self.category {
            pairs.push(("category", c.clone()));
        }
        if let Some(e) = self.entity {
            pairs.push(("entity", e.to_string()));
        }
        if let Some(t) = self.from {
            pairs.push(("from", t.to_rfc3339()));
        }
        if let Some(t) = self.to {
            pairs.push(("to", t.to_rfc3339()));
        }
        format!("/v1/search?{}", query_string(pairs))
    }
}

fn utc_midnight(d: NaiveDate) -> DateTime<Utc> {
    Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).expect("midnight exists"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub id: ClusterId,
    pub kind: ClusterKind,
    pub language: String,
    pub title: String,
    pub size: usize,
    pub medoid_id: ArticleId,
    pub window_start: DateTime<Utc>,
    pub window_end: DateTime<Utc>,
    pub live: bool,
    pub categories: BTreeMap<String, u32>,
    pub entities: BTreeMap<EntityId, u32>,
    pub main_toponym: Option<ToponymId>,
    pub size_history: Vec<SizePoint>,
    /// Bucket medoid titles keyed like `size_history`.
    pub history_titles: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub story_id: Option<StoryId>,
    pub articles: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopStoriesDoc {
    pub language: String,
    pub n: usize,
    pub clock: DateTime<Utc>,
    pub page: Page<ClusterSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDoc {
    pub cluster: ClusterSummary,
    /// Set when the requested id was merged into `cluster`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub requested_id: Option<ClusterId>,
    pub medoid: Option<ArticleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryDay {
    pub day: NaiveDate,
    pub cluster_id: ClusterId,
    pub title: String,
    pub size: usize,
    pub articles: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryDoc {
    pub id: StoryId,
    pub language: String,
    pub total_articles: usize,
    pub days: Vec<StoryDay>,
    pub cross_links: Vec<(String, StoryId)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRow {
    #[serde(flatten)]
    pub cell: AlertCell,
    pub articles: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertsDoc {
    pub clock: DateTime<Utc>,
    pub window_start: DateTime<Utc>,
    pub baseline_days: u32,
    pub page: Page<AlertRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesParams {
    #[serde(default)]
    pub country: Option<CountryCode>,
    #[serde(default)]
    pub category: Option<String>,
    #[serde(default)]
    pub lang: Option<String>,
    #[serde(default = "default_resolution")]
    pub resolution: Resolution,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    #[serde(default)]
    pub from: Option<NaiveDate>,
    /// Inclusive.
    #[serde(default)]
    pub to: Option<NaiveDate>,
}

fn default_resolution() -> Resolution {
    Resolution::Day
}

fn default_metric() -> Metric {
    Metric::Count
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDoc {
    pub query: SeriesQuery,
    pub points: Vec<SeriesPoint>,
    pub articles: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDoc {
    pub entity: Entity,
    pub mentions: usize,
    pub related: Vec<LabelledRelated>,
    pub associated: Vec<LabelledAssociated>,
    pub latest_clusters: Vec<ClusterSummary>,
    pub quotes: Vec<QuoteView>,
    pub articles: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledRelated {
    #[serde(flatten)]
    pub related: RelatedEntity,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledAssociated {
    #[serde(flatten)]
    pub associated: AssociatedEntity,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteView {
    #[serde(flatten)]
    pub quote: StoredQuote,
    pub published_at: Option<DateTime<Utc>>,
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub seeds: Vec<EntityId>,
    pub graph: NodeLinkGraph,
    pub articles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDoc {
    pub clock: DateTime<Utc>,
    pub page: Page<ArticleRecord>,
    pub facets: ChannelFacets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionDoc {
    pub dimension: Dimension,
    pub total: u64,
    pub rows: Vec<DistributionRow>,
    pub articles: String,
}

/// A read-only view of one store state plus the resources and settings
/// needed to render documents.
pub struct Snapshot<'a> {
    pub store: &'a Store,
    pub resources: &'a LinguisticResources,
    pub alerts: &'a AlertConfig,
    pub clock: DateTime<Utc>,
}

impl<'a> Snapshot<'a> {
    /// Snapshot at [`default_clock`].
    pub fn new(store: &'a Store, resources: &'a LinguisticResources, alerts: &'a AlertConfig) -> Self {
        Self { store, resources, alerts, clock: default_clock(store) }
    }

    pub fn at(mut self, clock: DateTime<Utc>) -> Self {
        self.clock = clock;
        self
    }

    pub fn entity_label(&self, id: EntityId) -> String {
        self.resources.gazetteer.get(id).map(|e| e.canonical_name.clone()).unwrap_or_else(|| format!("entity {id}"))
    }

    fn summary(&self, c: &Cluster) -> ClusterSummary {
        let history_titles = c
            .size_history
            .iter()
            .map(|p| self.store.get(p.medoid_id).map(|r| r.title.clone()).unwrap_or_default())
            .collect();
        ClusterSummary {
            id: c.id,
            kind: c.kind,
            language: c.language.clone(),
            title: c.title.clone(),
            size: c.size(),
            medoid_id: c.medoid_id,
            window_start: c.window_start,
            window_end: c.window_end,
            live: c.live,
            categories: c.categories.clone(),
            entities: c.entities.clone(),
            main_toponym: c.main_toponym(),
            size_history: c.size_history.clone(),
            history_titles,
            story_id: c.story_id,
            articles: cluster_articles_href(c.id),
        }
    }

    /// The `n` largest live window clusters in `language`.
    pub fn top_stories(&self, language: &str, n: usize, paging: Paging) -> TopStoriesDoc {
        let items = top_stories(self.store.clusters(), language, n).into_iter().map(|c| self.summary(c)).collect();
        TopStoriesDoc { language: language.to_string(), n, clock: self.clock, page: paging.page(items, SORT_TOP) }
    }

    pub fn cluster(&self, id: ClusterId) -> Result<ClusterDoc> {
        let c = self.store.resolve_cluster(id).ok_or_else(|| Error::NotFound(format!("cluster {id}")))?;
        Ok(ClusterDoc {
            cluster: self.summary(c),
            requested_id: (c.id != id).then_some(id),
            medoid: self.store.get(c.medoid_id).cloned(),
        })
    }

    /// Member records of a cluster, most recent first.
    pub fn cluster_articles(&self, id: ClusterId, paging: Paging) -> Result<Page<ArticleRecord>> {
        let c = self.store.resolve_cluster(id).ok_or_else(|| Error::NotFound(format!("cluster {id}")))?;
        let ids: BTreeSet<ArticleId> = c.member_ids.iter().copied().collect();
        let records = self.store.in_recency_order(&ids).into_iter().cloned().collect();
        Ok(paging.page(records, SORT_RECENCY))
    }

    pub fn story(&self, id: StoryId) -> Result<StoryDoc> {
        let s: &Story = self.store.story(id).ok_or_else(|| Error::NotFound(format!("story {id}")))?;
        let days = s
            .daily_cluster_ids
            .iter()
            .map(|(day, cid)| StoryDay {
                day: *day,
                cluster_id: *cid,
                title: s.title_per_day.get(day).cloned().unwrap_or_default(),
                size: s.size_per_day.get(day).copied().unwrap_or(0),
                articles: cluster_articles_href(*cid),
            })
            .collect();
        Ok(StoryDoc {
            id: s.id,
            language: s.language.clone(),
            total_articles: s.total_articles(),
            days,
            cross_links: s.cross_links.iter().cloned().collect(),
        })
    }

    fn alert_cell_href(&self, country: CountryCode, category: &str) -> String {
        let pairs = [
            ("country", country.to_string()),
            ("category", category.to_string()),
            ("clock", self.clock.to_rfc3339()),
        ];
        format!("/v1/alerts/cell?{}", query_string(pairs))
    }

    /// The alert board at the snapshot clock.
    pub fn alerts(&self, paging: Paging) -> Result<AlertsDoc> {
        let board = alerting::alert_board(self.store, self.clock, self.alerts)?;
        let rows = board
            .into_iter()
            .map(|cell| AlertRow { articles: self.alert_cell_href(cell.country, &cell.category_id), cell })
            .collect();
        Ok(AlertsDoc {
            clock: self.clock,
            window_start: self.clock - Duration::hours(24),
            baseline_days: self.alerts.baseline_days,
            page: paging.page(rows, SORT_BOARD),
        })
    }

    /// Records counted in one board cell's observed window.
    pub fn alert_cell_articles(&self, country: CountryCode, category: &str, paging: Paging) -> Page<ArticleRecord> {
        let from = self.clock - Duration::hours(24);
        let ids: BTreeSet<ArticleId> = self
            .store
            .records()
            .iter()
            .filter(|r| r.published_at >= from && r.published_at < self.clock)
            .filter(|r| r.cells().iter().any(|(c, k)| *c == country && k == category))
            .map(|r| r.id)
            .collect();
        let records = self.store.in_recency_order(&ids).into_iter().cloned().collect();
        paging.page(records, SORT_RECENCY)
    }

    /// Daily or monthly counts or mean tonality. Missing bounds default to
    /// the 30 days before the clock.
    pub fn series(&self, p: &SeriesParams) -> SeriesDoc {
        let last = (self.clock - Duration::seconds(1)).date_naive();
        let to = p.to.unwrap_or(last);
        let from = p.from.unwrap_or(to - Duration::days(29));
        let query = SeriesQuery {
            country: p.country,
            category: p.category.clone(),
            language: p.lang.clone(),
            resolution: p.resolution,
            metric: p.metric,
            from,
            to,
        };
        let points = alerting::series(self.store, &query);
        let drill = SearchParams {
            lang: p.lang.clone(),
            country_about: p.country,
            category: p.category.clone(),
            from: Some(utc_midnight(from)),
            to: Some(utc_midnight(to + Duration::days(1))),
            ..SearchParams::default()
        };
        SeriesDoc { query, points, articles: drill.href() }
    }

    /// Co-occurrence over surviving window clusters.
    pub fn cooccurrence(&self) -> CooccurrenceIndex {
        CooccurrenceIndex::from_clusters(self.store.clusters().filter(|c| c.kind == ClusterKind::Window))
    }

    pub fn entity(&self, id: EntityId, n: usize) -> Result<EntityDoc> {
        let entity = self.resources.gazetteer.get(id).ok_or(Error::UnknownEntity(id))?.clone();
        let idx = self.cooccurrence();
        let (related, associated) = if idx.contains(id) {
            (related_entities(id, &idx, n)?, associated_entities(id, &idx, n)?)
        } else {
            (Vec::new(), Vec::new())
        };
        let mut latest: Vec<&Cluster> = self
            .store
            .clusters()
            .filter(|c| c.kind == ClusterKind::Window && c.merged_into.is_none() && c.entities.contains_key(&id))
            .collect();
        latest.sort_by(|a, b| b.window_end.cmp(&a.window_end).then(a.id.cmp(&b.id)));
        latest.truncate(LATEST_CLUSTERS);
        let mut quotes: Vec<QuoteView> = self
            .store
            .quotes()
            .iter()
            .filter(|q| q.speaker_entity == Some(id) || q.mentioned_entities.contains(&id))
            .map(|q| {
                let r = self.store.get(q.article_id);
                QuoteView { quote: q.clone(), published_at: r.map(|r| r.published_at), title: r.map(|r| r.title.clone()) }
            })
            .collect();
        quotes.sort_by(|a, b| b.published_at.cmp(&a.published_at).then(a.quote.article_id.cmp(&b.quote.article_id)));
        quotes.truncate(LATEST_QUOTES);
        let mentions = self.store.facet_ids(crate::store::Facet::Entity(id)).len();
        Ok(EntityDoc {
            entity,
            mentions,
            related: related.into_iter().map(|r| LabelledRelated { label: self.entity_label(r.entity_id), related: r }).collect(),
            associated: associated
                .into_iter()
                .map(|a| LabelledAssociated { label: self.entity_label(a.entity_id), associated: a })
                .collect(),
            latest_clusters: latest.into_iter().map(|c| self.summary(c)).collect(),
            quotes,
            articles: SearchParams { entity: Some(id), ..SearchParams::default() }.href(),
        })
    }

    fn entity_hrefs(&self, ids: impl IntoIterator<Item = EntityId>) -> Vec<String> {
        ids.into_iter().map(|e| SearchParams { entity: Some(e), ..SearchParams::default() }.href()).collect()
    }

    pub fn ego_graph(&self, seeds: &BTreeSet<EntityId>, n: usize) -> Result<GraphDoc> {
        let graph = ego_graph(seeds, &self.cooccurrence(), n, |e| self.entity_label(e))?;
        Ok(GraphDoc { seeds: seeds.iter().copied().collect(), articles: self.entity_hrefs(seeds.iter().copied()), graph })
    }

    /// Quote graph over all stored quotes, or those touching `seeds`.
    pub fn quote_graph(&self, seeds: &BTreeSet<EntityId>) -> GraphDoc {
        let quotes = self.store.quotes().iter().filter(|q| {
            seeds.is_empty()
                || q.speaker_entity.is_some_and(|s| seeds.contains(&s))
                || q.mentioned_entities.iter().any(|m| seeds.contains(m))
        });
        let graph = quote_graph(quotes, |e| self.entity_label(e));
        let articles = self.entity_hrefs(graph.nodes.iter().map(|n| n.id));
        GraphDoc { seeds: seeds.iter().copied().collect(), graph, articles }
    }

    pub fn search(&self, params: &SearchParams, paging: Paging) -> Page<ArticleRecord> {
        let records = self.store.search(&params.query()).into_iter().cloned().collect();
        paging.page(records, SORT_RECENCY)
    }

    pub fn channel(&self, expr: &ChannelExpr, paging: Paging) -> Result<ChannelDoc> {
        let ids = channels::evaluate(expr, self.store, Some(self.clock))?;
        let facets = channels::channel_metadata(&ids, self.store);
        let records = ids.iter().filter_map(|id| self.store.get(*id)).cloned().collect();
        Ok(ChannelDoc { clock: self.clock, page: paging.page(records, SORT_RECENCY), facets })
    }

    pub fn distribution(&self, params: &SearchParams, dim: Dimension) -> DistributionDoc {
        let rows = distribution_report(self.store, &params.query(), dim);
        DistributionDoc { dimension: dim, total: rows.iter().map(|r| r.count).sum(), rows, articles: params.href() }
    }

    pub fn map_points(&self, filter: &MapFilter) -> Vec<MapPoint> {
        export::map_points(self.store, &self.resources.toponyms, filter)
    }

    pub fn map_geojson(&self, filter: &MapFilter) -> Value {
        export::to_geojson(&self.map_points(filter))
    }

    pub fn map_kml(&self, filter: &MapFilter) -> String {
        export::to_kml(&self.map_points(filter))
    }
}

/// Default neighbourhood size for entity pages and ego graphs.
pub const DEFAULT_GRAPH_N: usize = DEFAULT_NEIGHBOURS;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json_sorts_nested_keys() {
        let v = serde_json::json!({"b": 1, "a": {"d": [ {"z": 0, "y": 1} ], "c": null}});
        assert_eq!(canonical_json(&v).unwrap(), r#"{"a":{"c":null,"d":[{"y":1,"z":0}]},"b":1}"#);
    }

    #[test]
    fn paging_clamps_and_slices() {
        let p = Paging::new(2, 3).page((0..10).collect(), "id");
        assert_eq!(p.items, vec![2, 3, 4]);
        assert_eq!(p.total, 10);
        let p = Paging { offset: None, limit: Some(5000) }.page((0..10).collect::<Vec<u32>>(), "id");
        assert_eq!(p.limit, MAX_LIMIT);
        assert_eq!(p.items.len(), 10);
        let p = Paging::new(20, 3).page((0..10).collect::<Vec<u32>>(), "id");
        assert!(p.items.is_empty());
    }

    #[test]
    fn search_href_round_trips() {
        let p = SearchParams {
            q: Some("flood warning".into()),
            category: Some("flood".into()),
            entity: Some(7),
            from: Some("2024-06-01T00:00:00Z".parse().unwrap()),
            ..SearchParams::default()
        };
        let href = p.href();
        let qs = href.strip_prefix("/v1/search?").unwrap();
        let back: BTreeMap<String, String> = form_urlencoded::parse(qs.as_bytes()).into_owned().collect();
        assert_eq!(back["q"], "flood warning");
        assert_eq!(back["entity"], "7");
        assert_eq!(back["from"].parse::<DateTime<Utc>>().unwrap(), p.from.unwrap());
    }

    #[test]
    fn default_clock_is_next_midnight() {
        assert_eq!(default_clock(&Store::in_memory()), DateTime::UNIX_EPOCH);
    }
}
