//! Entity co-occurrence networks and the quotation digraph.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::clustering::Cluster;
use crate::ingest::SourceKind;
use crate::store::{SearchQuery, Store, StoredQuote, NO_CATEGORY};
use crate::types::EntityId;

pub const DEFAULT_NEIGHBOURS: usize = 100;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("ego graph needs at least one seed")]
    NoSeeds,
}

/// Counts of clusters mentioning each entity and each unordered entity
/// pair. Pairs are stored once with the smaller id first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CooccurrenceIndex {
    entity_counts: BTreeMap<EntityId, u64>,
    pair_counts: BTreeMap<(EntityId, EntityId), u64>,
    neighbours: BTreeMap<EntityId, BTreeSet<EntityId>>,
}

fn pair(a: EntityId, b: EntityId) -> (EntityId, EntityId) {
    (a.min(b), a.max(b))
}

impl CooccurrenceIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one co-occurrence unit (a cluster) mentioning `entities`.
    pub fn add_unit(&mut self, entities: &BTreeSet<EntityId>) {
        for &e in entities {
            *self.entity_counts.entry(e).or_insert(0) += 1;
        }
        let v: Vec<_> = entities.iter().copied().collect();
        for (i, &a) in v.iter().enumerate() {
            for &b in &v[i + 1..] {
                self.add_pair(a, b, 1);
            }
        }
    }

    fn add_pair(&mut self, a: EntityId, b: EntityId, n: u64) {
        *self.pair_counts.entry(pair(a, b)).or_insert(0) += n;
        self.neighbours.entry(a).or_default().insert(b);
        self.neighbours.entry(b).or_default().insert(a);
    }

    /// Builds from raw counts. Pairs may be given in either order.
    pub fn from_counts(entity_counts: BTreeMap<EntityId, u64>, pairs: impl IntoIterator<Item = ((EntityId, EntityId), u64)>) -> Self {
        let mut idx = Self { entity_counts, ..Self::default() };
        for ((a, b), n) in pairs {
            if a != b && n > 0 {
                idx.add_pair(a, b, n);
            }
        }
        idx
    }

    /// Co-occurrence over surviving clusters (merged-away clusters skipped).
    pub fn from_clusters<'a>(clusters: impl IntoIterator<Item = &'a Cluster>) -> Self {
        let mut idx = Self::new();
        for c in clusters.into_iter().filter(|c| c.merged_into.is_none()) {
            idx.add_unit(&c.entities.keys().copied().collect());
        }
        idx
    }

    pub fn merge(&mut self, other: &CooccurrenceIndex) {
        for (e, n) in &other.entity_counts {
            *self.entity_counts.entry(*e).or_insert(0) += n;
        }
        for (&(a, b), &n) in &other.pair_counts {
            self.add_pair(a, b, n);
        }
    }

    pub fn entity_count(&self, e: EntityId) -> u64 {
        self.entity_counts.get(&e).copied().unwrap_or(0)
    }

    pub fn pair_count(&self, a: EntityId, b: EntityId) -> u64 {
        self.pair_counts.get(&pair(a, b)).copied().unwrap_or(0)
    }

    pub fn contains(&self, e: EntityId) -> bool {
        self.entity_counts.contains_key(&e)
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.entity_counts.keys().copied()
    }

    pub fn neighbours(&self, e: EntityId) -> impl Iterator<Item = EntityId> + '_ {
        self.neighbours.get(&e).into_iter().flatten().copied()
    }

    fn check(&self, e: EntityId) -> Result<(), GraphError> {
        if self.contains(e) {
            Ok(())
        } else {
            Err(GraphError::UnknownEntity(e))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatedEntity {
    pub entity_id: EntityId,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociatedEntity {
    pub entity_id: EntityId,
    pub score: f64,
    pub pair_count: u64,
}

/// Top `n` co-occurring entities by raw pair count, ties by id.
pub fn related_entities(p: EntityId, idx: &CooccurrenceIndex, n: usize) -> Result<Vec<RelatedEntity>, GraphError> {
    idx.check(p)?;
    let mut out: Vec<_> = idx.neighbours(p).map(|e| RelatedEntity { entity_id: e, count: idx.pair_count(p, e) }).collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then(a.entity_id.cmp(&b.entity_id)));
    out.truncate(n);
    Ok(out)
}

/// `pair(p, e)² / (count(p) · count(e))`.
pub fn association(pair: u64, count_p: u64, count_e: u64) -> f64 {
    let pair = pair as f64;
    pair * pair / (count_p as f64 * count_e as f64)
}

/// Top `n` entities by association score, ties by pair count then id.
pub fn associated_entities(p: EntityId, idx: &CooccurrenceIndex, n: usize) -> Result<Vec<AssociatedEntity>, GraphError> {
    idx.check(p)?;
    let cp = idx.entity_count(p);
    let mut out: Vec<_> = idx
        .neighbours(p)
        .map(|e| {
            let pc = idx.pair_count(p, e);
            AssociatedEntity { entity_id: e, score: association(pc, cp, idx.entity_count(e)), pair_count: pc }
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(b.pair_count.cmp(&a.pair_count)).then(a.entity_id.cmp(&b.entity_id)));
    out.truncate(n);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: EntityId,
    pub label: String,
    pub common: bool,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphLink {
    pub source: EntityId,
    pub target: EntityId,
    pub weight: f64,
}

/// Node-link graph. Nodes ascend by id; links by (source, target).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeLinkGraph {
    pub nodes: Vec<GraphNode>,
    pub links: Vec<GraphLink>,
    /// Requested seeds that were not in the index.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing: Vec<EntityId>,
}

/// Ranks nodes 1.. by descending weight, ties by id.
fn ranks(weights: &BTreeMap<EntityId, f64>) -> BTreeMap<EntityId, usize> {
    let mut v: Vec<_> = weights.iter().collect();
    v.sort_by(|a, b| b.1.total_cmp(a.1).then(a.0.cmp(b.0)));
    v.into_iter().enumerate().map(|(i, (e, _))| (*e, i + 1)).collect()
}

/// Union of each seed's top-`n` associated entities. A node is common when
/// linked to two or more seeds. Ranks order nodes by weighted degree.
pub fn ego_graph(
    seeds: &BTreeSet<EntityId>,
    idx: &CooccurrenceIndex,
    n: usize,
    label: impl Fn(EntityId) -> String,
) -> Result<NodeLinkGraph, GraphError> {
    if seeds.is_empty() {
        return Err(GraphError::NoSeeds);
    }
    let mut links: BTreeMap<(EntityId, EntityId), f64> = BTreeMap::new();
    let mut seed_adjacency: BTreeMap<EntityId, BTreeSet<EntityId>> = BTreeMap::new();
    let mut missing = Vec::new();
    let mut present = BTreeSet::new();
    for &s in seeds {
        match associated_entities(s, idx, n) {
            Ok(list) => {
                present.insert(s);
                for a in list {
                    links.insert(pair(s, a.entity_id), a.score);
                    seed_adjacency.entry(a.entity_id).or_default().insert(s);
                }
            }
            Err(GraphError::UnknownEntity(e)) => missing.push(e),
            Err(e) => return Err(e),
        }
    }
    if present.is_empty() {
        return Err(GraphError::UnknownEntity(missing[0]));
    }
    let mut degree: BTreeMap<EntityId, f64> = present.iter().map(|&s| (s, 0.0)).collect();
    for (&(a, b), &w) in &links {
        *degree.entry(a).or_insert(0.0) += w;
        *degree.entry(b).or_insert(0.0) += w;
    }
    let rank = ranks(&degree);
    let nodes = degree
        .keys()
        .map(|&id| GraphNode {
            id,
            label: label(id),
            common: seed_adjacency.get(&id).is_some_and(|s| s.len() >= 2),
            rank: rank[&id],
        })
        .collect();
    let links = links.into_iter().map(|((source, target), weight)| GraphLink { source, target, weight }).collect();
    Ok(NodeLinkGraph { nodes, links, missing })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuoteEdge {
    pub from_entity: EntityId,
    pub to_entity: EntityId,
    pub count: u64,
}

/// Who mentions whom in attributed quotes. Node rank 1 is the most
/// mentioned entity by weighted in-degree, ties by id.
pub fn quote_graph<'a>(quotes: impl IntoIterator<Item = &'a StoredQuote>, label: impl Fn(EntityId) -> String) -> NodeLinkGraph {
    let mut edges: BTreeMap<(EntityId, EntityId), u64> = BTreeMap::new();
    for q in quotes {
        let Some(from) = q.speaker_entity else { continue };
        for &to in q.mentioned_entities.iter().filter(|&&to| to != from) {
            *edges.entry((from, to)).or_insert(0) += 1;
        }
    }
    let mut indegree: BTreeMap<EntityId, f64> = BTreeMap::new();
    for (&(a, b), &n) in &edges {
        indegree.entry(a).or_insert(0.0);
        *indegree.entry(b).or_insert(0.0) += n as f64;
    }
    let rank = ranks(&indegree);
    NodeLinkGraph {
        nodes: indegree.keys().map(|&id| GraphNode { id, label: label(id), common: false, rank: rank[&id] }).collect(),
        links: edges.into_iter().map(|((source, target), n)| GraphLink { source, target, weight: n as f64 }).collect(),
        missing: Vec::new(),
    }
}

pub fn quote_edges(graph: &NodeLinkGraph) -> Vec<QuoteEdge> {
    graph.links.iter().map(|l| QuoteEdge { from_entity: l.source, to_entity: l.target, count: l.weight as u64 }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Language,
    Country,
    Category,
    SourceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub bucket: String,
    pub count: u64,
    pub share: f64,
}

fn kind_label(k: SourceKind) -> String {
    k.as_str().to_string()
}

/// Counts and shares of matching articles over `dim`, by count descending
/// then bucket. Countries are source countries; an article with several
/// categories counts once in each.
pub fn distribution_report(store: &Store, filter: &SearchQuery, dim: Dimension) -> Vec<DistributionRow> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for r in store.search_ids(filter).into_iter().filter_map(|id| store.get(id)) {
        let buckets: Vec<String> = match dim {
            Dimension::Language => vec![r.language.clone()],
            Dimension::Country => vec![r.country_of_source.to_string()],
            Dimension::SourceKind => vec![kind_label(r.source_kind)],
            Dimension::Category if r.categories.is_empty() => vec![NO_CATEGORY.to_string()],
            Dimension::Category => r.categories.iter().cloned().collect(),
        };
        for b in buckets {
            *counts.entry(b).or_insert(0) += 1;
        }
    }
    let total: u64 = counts.values().sum();
    let mut rows: Vec<_> = counts
        .into_iter()
        .map(|(bucket, count)| DistributionRow { bucket, count, share: count as f64 / total as f64 })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.bucket.cmp(&b.bucket)));
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionComparison {
    pub dimension: Dimension,
    pub a: Vec<DistributionRow>,
    pub b: Vec<DistributionRow>,
}

pub fn compare_distributions(store: &Store, a: &SearchQuery, b: &SearchQuery, dim: Dimension) -> DistributionComparison {
    DistributionComparison { dimension: dim, a: distribution_report(store, a, dim), b: distribution_report(store, b, dim) }
}

/// CSV rendering with the columns `bucket,count,share`.
pub fn distribution_csv(rows: &[DistributionRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(counts: &[(EntityId, u64)], pairs: &[((EntityId, EntityId), u64)]) -> CooccurrenceIndex {
        CooccurrenceIndex::from_counts(counts.iter().copied().collect(), pairs.iter().copied())
    }

    #[test]
    fn related_single_partner() {
        let i = idx(&[(1, 3), (2, 3)], &[((1, 2), 3)]);
        assert_eq!(related_entities(1, &i, 100).unwrap(), vec![RelatedEntity { entity_id: 2, count: 3 }]);
        assert_eq!(related_entities(9, &i, 100), Err(GraphError::UnknownEntity(9)));
    }

    #[test]
    fn related_capped_at_n() {
        let mut counts = vec![(0, 200)];
        let mut pairs = Vec::new();
        for e in 1..=150 {
            counts.push((e, 5));
            pairs.push(((0, e), 1 + e % 4));
        }
        let i = idx(&counts, &pairs);
        assert_eq!(related_entities(0, &i, 100).unwrap().len(), 100);
    }

    #[test]
    fn exclusive_partner_scores_one() {
        let i = idx(&[(1, 4), (2, 4)], &[((2, 1), 4)]);
        assert_eq!(associated_entities(1, &i, 100).unwrap()[0].score, 1.0);
    }

    #[test]
    fn vip_suppression() {
        let i = idx(&[(1, 10), (2, 5), (3, 100)], &[((1, 2), 5), ((1, 3), 5)]);
        let assoc = associated_entities(1, &i, 100).unwrap();
        assert_eq!(assoc.iter().map(|a| a.entity_id).collect::<Vec<_>>(), [2, 3]);
        assert!((assoc[0].score - 0.5).abs() < 1e-12);
        assert!((assoc[1].score - 0.025).abs() < 1e-12);
        let rel = related_entities(1, &i, 100).unwrap();
        assert_eq!(rel[0].count, rel[1].count);
    }

    #[test]
    fn units_build_symmetric_counts() {
        let mut i = CooccurrenceIndex::new();
        i.add_unit(&BTreeSet::from([1, 2, 3]));
        i.add_unit(&BTreeSet::from([2, 3]));
        assert_eq!(i.pair_count(3, 2), 2);
        assert_eq!(i.pair_count(1, 3), 1);
        assert_eq!(i.entity_count(2), 2);
    }

    #[test]
    fn ego_common_flags() {
        let i = idx(&[(1, 5), (2, 5), (3, 5), (4, 5)], &[((1, 3), 2), ((2, 3), 2), ((1, 4), 1)]);
        let one = ego_graph(&BTreeSet::from([1]), &i, 100, |e| e.to_string()).unwrap();
        assert!(one.nodes.iter().all(|n| !n.common));
        let two = ego_graph(&BTreeSet::from([1, 2, 99]), &i, 100, |e| e.to_string()).unwrap();
        let common: Vec<_> = two.nodes.iter().filter(|n| n.common).map(|n| n.id).collect();
        assert_eq!(common, [3]);
        assert_eq!(two.missing, [99]);
    }

    #[test]
    fn quote_graph_single_edge() {
        let q = StoredQuote { article_id: 1, speaker_entity: Some(1), text: None, mentioned_entities: BTreeSet::from([2]) };
        let g = quote_graph([&q], |e| e.to_string());
        assert_eq!(quote_edges(&g), vec![QuoteEdge { from_entity: 1, to_entity: 2, count: 1 }]);
        assert_eq!(g.nodes.iter().find(|n| n.id == 2).unwrap().rank, 1);
        assert_eq!(quote_graph(std::iter::empty(), |e| e.to_string()), NodeLinkGraph::default());
    }
}
