//! Windowed document clustering, medoid naming, cross-lingual links and
//! day-to-day story chains.

mod agglomerative;
mod daily;
mod story;
mod vector;
mod window;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use daily::daily_clusters;
pub use agglomerative::{agglomerate, centroid, cluster_window, select_medoid};
pub use story::{attach_to_story, Story, StoryTracker, DEFAULT_LOOKBACK_DAYS};
pub use vector::{term_counts, vectorize, DocVector, SparseVector, TermDoc, Vectorized};
pub use window::{TickReport, WindowClusterer, WindowDoc};

use crate::types::{ArticleId, ClusterId, EntityId, StoryId, ToponymId};

/// Default merge threshold on average cosine.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Threshold on entity/category feature cosine for cross-lingual and
/// story links.
pub const LINK_THRESHOLD: f64 = 0.3;
pub const ENTITY_WEIGHT: f64 = 2.0;
pub const CATEGORY_WEIGHT: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("article {0} has an empty vocabulary")]
    EmptyVocabulary(ArticleId),
    #[error("clock moved backwards from {previous} to {now}")]
    ClockRegression { previous: DateTime<Utc>, now: DateTime<Utc> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterKind {
    /// Sliding-window cluster behind the live top stories.
    Window,
    /// One calendar day's cluster, the unit of story chains.
    Daily,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizePoint {
    pub bucket: DateTime<Utc>,
    pub count: usize,
    pub medoid_id: ArticleId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: ClusterId,
    pub kind: ClusterKind,
    pub language: String,
    /// Sorted member article ids.
    pub member_ids: Vec<ArticleId>,
    /// Mean of the member vectors. Kept in memory only: persisting it would
    /// retain body vocabulary.
    #[serde(skip)]
    pub centroid: SparseVector,
    pub medoid_id: ArticleId,
    pub title: String,
    pub window_start: DateTime<Utc>,
    pub window_end: DateTime<Utc>,
    pub categories: BTreeMap<String, u32>,
    pub entities: BTreeMap<EntityId, u32>,
    pub toponyms: BTreeMap<ToponymId, u32>,
    #[serde(default)]
    pub size_history: Vec<SizePoint>,
    pub live: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retired_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merged_into: Option<ClusterId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub story_id: Option<StoryId>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.member_ids.len()
    }

    pub fn link_features(&self) -> LinkFeatures {
        LinkFeatures {
            entities: self.entities.keys().copied().collect(),
            categories: self.categories.keys().cloned().collect(),
        }
    }

    /// Most frequent toponym, ties to the smallest id.
    pub fn main_toponym(&self) -> Option<ToponymId> {
        self.toponyms
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(id, _)| *id)
    }

    fn days(&self) -> (NaiveDate, NaiveDate) {
        match self.day {
            Some(d) => (d, d),
            None => (self.window_start.date_naive(), self.window_end.date_naive()),
        }
    }
}

/// Language-independent features of a cluster.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkFeatures {
    pub entities: BTreeSet<EntityId>,
    pub categories: BTreeSet<String>,
}

/// Cosine between binary feature vectors, entities weighted 2 and
/// categories 1.
pub fn feature_cosine(a: &LinkFeatures, b: &LinkFeatures) -> f64 {
    let (we, wc) = (ENTITY_WEIGHT * ENTITY_WEIGHT, CATEGORY_WEIGHT * CATEGORY_WEIGHT);
    let dot = we * a.entities.intersection(&b.entities).count() as f64
        + wc * a.categories.intersection(&b.categories).count() as f64;
    let na = we * a.entities.len() as f64 + wc * a.categories.len() as f64;
    let nb = we * b.entities.len() as f64 + wc * b.categories.len() as f64;
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb).sqrt()
    }
}

/// Whether two clusters in different languages covering a common day
/// report the same event.
pub fn link_cross_lingual(a: &Cluster, b: &Cluster) -> bool {
    if a.language == b.language {
        return false;
    }
    let ((a0, a1), (b0, b1)) = (a.days(), b.days());
    if a1 < b0 || b1 < a0 {
        return false;
    }
    feature_cosine(&a.link_features(), &b.link_features()) >= LINK_THRESHOLD
}

/// The `n` largest live clusters, ties to the earlier `window_start`.
pub fn top_stories<'a>(clusters: impl IntoIterator<Item = &'a Cluster>, language: &str, n: usize) -> Vec<&'a Cluster> {
    let mut live: Vec<&Cluster> = clusters
        .into_iter()
        .filter(|c| c.live && c.kind == ClusterKind::Window && c.language == language)
        .collect();
    live.sort_by(|a, b| b.size().cmp(&a.size()).then(a.window_start.cmp(&b.window_start)).then(a.id.cmp(&b.id)));
    live.truncate(n);
    live
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn cluster(id: ClusterId, lang: &str, size: usize, entities: &[EntityId], cats: &[&str]) -> Cluster {
        let t: DateTime<Utc> = "2024-05-01T10:00:00Z".parse().unwrap();
        Cluster {
            id,
            kind: ClusterKind::Window,
            language: lang.into(),
            member_ids: (0..size as u64).map(|i| id * 1000 + i).collect(),
            centroid: SparseVector::default(),
            medoid_id: id * 1000,
            title: format!("cluster {id}"),
            window_start: t,
            window_end: t,
            categories: cats.iter().map(|c| (c.to_string(), 1)).collect(),
            entities: entities.iter().map(|e| (*e, 1)).collect(),
            toponyms: BTreeMap::new(),
            size_history: vec![],
            live: true,
            retired_at: None,
            merged_into: None,
            day: None,
            story_id: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::cluster;
    use super::*;

    #[test]
    fn cross_lingual_identical_and_disjoint() {
        let a = cluster(1, "en", 3, &[1, 2], &["flood"]);
        let b = cluster(2, "de", 3, &[1, 2], &["flood"]);
        let c = cluster(3, "fr", 3, &[7], &["sport"]);
        assert!((feature_cosine(&a.link_features(), &b.link_features()) - 1.0).abs() < 1e-12);
        assert!(link_cross_lingual(&a, &b));
        assert!(!link_cross_lingual(&a, &c));
        // same language never links
        let d = cluster(4, "en", 3, &[1, 2], &["flood"]);
        assert!(!link_cross_lingual(&a, &d));
    }

    #[test]
    fn cross_lingual_half_shared_entities() {
        // 6 entities each, 3 shared, one shared category:
        // (4*3 + 1) / sqrt((4*6+1)^2) = 13/25
        let a = cluster(1, "en", 3, &[1, 2, 3, 4, 5, 6], &["flood"]);
        let b = cluster(2, "es", 3, &[1, 2, 3, 7, 8, 9], &["flood"]);
        let cos = feature_cosine(&a.link_features(), &b.link_features());
        assert!((cos - 0.52).abs() < 1e-12);
        assert!(link_cross_lingual(&a, &b));
        // 1 shared of 6, different categories: 4/sqrt(25*25) = 0.16
        let c = cluster(3, "es", 3, &[1, 10, 11, 12, 13, 14], &["sport"]);
        assert!(!link_cross_lingual(&a, &c));
    }

    #[test]
    fn top_stories_order_and_limit() {
        let a = cluster(1, "en", 3, &[], &[]);
        let b = cluster(2, "en", 5, &[], &[]);
        let c = cluster(3, "de", 9, &[], &[]);
        let top = top_stories([&a, &b, &c], "en", 10);
        assert_eq!(top.iter().map(|c| c.size()).collect::<Vec<_>>(), vec![5, 3]);
        assert_eq!(top_stories([&a, &b], "en", 1).len(), 1);
    }
}
