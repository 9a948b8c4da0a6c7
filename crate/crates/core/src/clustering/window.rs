use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, Duration, Utc};

use super::agglomerative::{agglomerate, centroid, select_medoid};
use super::vector::{vectorize, DocVector, TermDoc};
use super::{Cluster, ClusterError, ClusterKind, SizePoint};
use crate::types::{bucket_of, ArticleId, ClusterId, EntityId, IdSource, ToponymId, BUCKET_SECS};

/// What the window clusterer keeps about an article. `term_counts` is
/// derived from the full text and lives only in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDoc {
    pub article_id: ArticleId,
    pub published_at: DateTime<Utc>,
    pub title: String,
    pub term_counts: BTreeMap<String, u32>,
    pub categories: BTreeSet<String>,
    pub entity_ids: BTreeSet<EntityId>,
    pub toponym_ids: BTreeSet<ToponymId>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickReport {
    pub created: Vec<ClusterId>,
    /// `(absorbed, survivor)` pairs.
    pub merged: Vec<(ClusterId, ClusterId)>,
    pub retired: Vec<ClusterId>,
    /// Arrivals too old to seed a cluster that joined none.
    pub dropped: Vec<ArticleId>,
    /// Arrivals with nothing left after stopword removal.
    pub excluded: Vec<ArticleId>,
}

/// Single-writer clustering state for one language.
///
/// Each tick re-vectorises the window (live cluster members plus arrivals)
/// and resumes average-link agglomeration with the live clusters as
/// unsplittable groups, so membership only grows until a cluster retires.
#[derive(Debug, Clone)]
pub struct WindowClusterer {
    language: String,
    window: Duration,
    threshold: f64,
    clock: Option<DateTime<Utc>>,
    docs: BTreeMap<ArticleId, WindowDoc>,
    clusters: BTreeMap<ClusterId, Cluster>,
    retired: Vec<Cluster>,
}

impl WindowClusterer {
    pub fn new(language: &str, window: Duration, threshold: f64) -> Self {
        Self {
            language: language.to_string(),
            window,
            threshold,
            clock: None,
            docs: BTreeMap::new(),
            clusters: BTreeMap::new(),
            retired: Vec::new(),
        }
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn clock(&self) -> Option<DateTime<Utc>> {
        self.clock
    }

    pub fn live(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.values()
    }

    pub fn get(&self, id: ClusterId) -> Option<&Cluster> {
        self.clusters.get(&id)
    }

    /// Clusters retired since the last call.
    pub fn take_retired(&mut self) -> Vec<Cluster> {
        std::mem::take(&mut self.retired)
    }

    /// Re-installs a live cluster, e.g. when resuming from a store.
    pub fn restore(&mut self, mut cluster: Cluster, docs: Vec<WindowDoc>) {
        cluster.live = true;
        for d in docs {
            self.docs.insert(d.article_id, d);
        }
        self.clusters.insert(cluster.id, cluster);
    }

    pub fn tick(&mut self, clock: DateTime<Utc>, arrivals: Vec<WindowDoc>, ids: &IdSource) -> Result<TickReport, ClusterError> {
        if let Some(previous) = self.clock {
            if clock < previous {
                return Err(ClusterError::ClockRegression { previous, now: clock });
            }
        }
        self.clock = Some(clock);
        let cutoff = clock - self.window;
        let mut report = TickReport::default();

        let mut arrival_ids = Vec::new();
        for d in arrivals {
            if let std::collections::btree_map::Entry::Vacant(e) = self.docs.entry(d.article_id) {
                arrival_ids.push(d.article_id);
                e.insert(d);
            }
        }

        let term_docs: Vec<TermDoc> = self
            .docs
            .values()
            .map(|d| TermDoc { article_id: d.article_id, term_counts: d.term_counts.clone() })
            .collect();
        let vectorized = vectorize(&term_docs);
        for id in &vectorized.excluded {
            self.docs.remove(id);
            report.excluded.push(*id);
        }
        let vectors = vectorized.vectors;
        let index: HashMap<ArticleId, usize> = vectors.iter().enumerate().map(|(i, v)| (v.article_id, i)).collect();

        let owner: HashMap<ArticleId, ClusterId> = self
            .clusters
            .values()
            .flat_map(|c| c.member_ids.iter().map(move |m| (*m, c.id)))
            .collect();
        let mut groups: Vec<Vec<usize>> = self
            .clusters
            .values()
            .map(|c| c.member_ids.iter().filter_map(|m| index.get(m).copied()).collect())
            .collect();
        groups.extend(arrival_ids.iter().filter_map(|id| index.get(id)).map(|&i| vec![i]));
        let merged = agglomerate(&vectors, groups, self.threshold);

        let mut next: BTreeMap<ClusterId, Vec<ArticleId>> = BTreeMap::new();
        for group in merged {
            let members: Vec<ArticleId> = group.iter().map(|&i| vectors[i].article_id).collect();
            let owners: BTreeSet<ClusterId> = members.iter().filter_map(|m| owner.get(m).copied()).collect();
            let id = match owners.first() {
                Some(&survivor) => {
                    for &absorbed in owners.iter().skip(1) {
                        report.merged.push((absorbed, survivor));
                    }
                    survivor
                }
                None => {
                    let fresh = members.iter().any(|m| self.docs[m].published_at > cutoff);
                    if !fresh {
                        report.dropped.extend(&members);
                        continue;
                    }
                    let id = ids.next_id();
                    report.created.push(id);
                    id
                }
            };
            next.insert(id, members);
        }

        for (absorbed, survivor) in &report.merged {
            if let Some(mut c) = self.clusters.remove(absorbed) {
                c.live = false;
                c.retired_at = Some(clock);
                c.merged_into = Some(*survivor);
                self.retired.push(c);
            }
        }

        for (id, members) in next {
            let newest = members.iter().map(|m| self.docs[m].published_at).max().expect("non-empty group");
            let mut cluster = self.clusters.remove(&id).unwrap_or_else(|| self.empty_cluster(id, newest));
            cluster.member_ids = members;
            self.refresh(&mut cluster, &vectors, &index, clock);
            if newest <= cutoff {
                cluster.live = false;
                cluster.retired_at = Some(clock);
                report.retired.push(id);
                self.retired.push(cluster);
            } else {
                self.clusters.insert(id, cluster);
            }
        }

        let keep: BTreeSet<ArticleId> = self.clusters.values().flat_map(|c| c.member_ids.iter().copied()).collect();
        self.docs.retain(|id, _| keep.contains(id));
        Ok(report)
    }

    fn empty_cluster(&self, id: ClusterId, at: DateTime<Utc>) -> Cluster {
        Cluster {
            id,
            kind: ClusterKind::Window,
            language: self.language.clone(),
            member_ids: Vec::new(),
            centroid: Default::default(),
            medoid_id: 0,
            title: String::new(),
            window_start: at,
            window_end: at,
            categories: BTreeMap::new(),
            entities: BTreeMap::new(),
            toponyms: BTreeMap::new(),
            size_history: Vec::new(),
            live: true,
            retired_at: None,
            merged_into: None,
            day: None,
            story_id: None,
        }
    }

    fn refresh(&self, cluster: &mut Cluster, vectors: &[DocVector], index: &HashMap<ArticleId, usize>, clock: DateTime<Utc>) {
        let docs: Vec<&WindowDoc> = cluster.member_ids.iter().map(|m| &self.docs[m]).collect();
        let member_vectors: Vec<(&DocVector, DateTime<Utc>)> =
            docs.iter().map(|d| (&vectors[index[&d.article_id]], d.published_at)).collect();
        let only_vectors: Vec<&DocVector> = member_vectors.iter().map(|(v, _)| *v).collect();
        cluster.centroid = centroid(&only_vectors);
        cluster.medoid_id = select_medoid(&member_vectors).expect("cluster has members");
        cluster.title = self.docs[&cluster.medoid_id].title.clone();
        cluster.window_start = docs.iter().map(|d| d.published_at).min().expect("members");
        cluster.window_end = docs.iter().map(|d| d.published_at).max().expect("members");
        cluster.categories = tally(docs.iter().flat_map(|d| d.categories.iter().cloned()));
        cluster.entities = tally(docs.iter().flat_map(|d| d.entity_ids.iter().copied()));
        cluster.toponyms = tally(docs.iter().flat_map(|d| d.toponym_ids.iter().copied()));
        record_size(&mut cluster.size_history, clock, cluster.member_ids.len(), cluster.medoid_id);
    }
}

pub(super) fn tally<K: Ord>(items: impl Iterator<Item = K>) -> BTreeMap<K, u32> {
    let mut m = BTreeMap::new();
    for k in items {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

/// Appends the count for the bucket containing `clock`, repeating the last
/// count for any skipped buckets so spacing stays 600 s.
fn record_size(history: &mut Vec<SizePoint>, clock: DateTime<Utc>, count: usize, medoid_id: ArticleId) {
    let bucket = bucket_of(clock);
    let step = Duration::seconds(BUCKET_SECS);
    if let Some(last) = history.last().cloned() {
        if last.bucket == bucket {
            let l = history.last_mut().expect("non-empty");
            l.count = count;
            l.medoid_id = medoid_id;
            return;
        }
        let mut b = last.bucket + step;
        while b < bucket {
            history.push(SizePoint { bucket: b, ..last.clone() });
            b += step;
        }
    }
    history.push(SizePoint { bucket, count, medoid_id });
}
