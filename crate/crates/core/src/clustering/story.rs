use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{feature_cosine, link_cross_lingual, Cluster, LinkFeatures, LINK_THRESHOLD};
use crate::types::{ClusterId, IdSource, StoryId};

pub const DEFAULT_LOOKBACK_DAYS: i64 = 7;

/// A chain of daily clusters about one subject in one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Story {
    pub id: StoryId,
    pub language: String,
    pub daily_cluster_ids: BTreeMap<NaiveDate, ClusterId>,
    pub title_per_day: BTreeMap<NaiveDate, String>,
    pub size_per_day: BTreeMap<NaiveDate, usize>,
    /// `(language, story id)` of equivalent stories.
    pub cross_links: BTreeSet<(String, StoryId)>,
    /// Features of the most recent daily cluster.
    pub last_features: LinkFeatures,
}

impl Story {
    pub fn last_day(&self) -> Option<NaiveDate> {
        self.daily_cluster_ids.keys().next_back().copied()
    }

    pub fn total_articles(&self) -> usize {
        self.size_per_day.values().sum()
    }
}

/// Picks the story a daily cluster continues: same language, most recent
/// cluster within the lookback and strictly before the cluster's day, best
/// feature cosine at or above the link threshold (ties to the smaller id).
/// Returns `None` when a new story is needed.
pub fn attach_to_story<'a>(cluster: &Cluster, stories: impl IntoIterator<Item = &'a Story>, lookback_days: i64) -> Option<StoryId> {
    let day = cluster.day.unwrap_or_else(|| cluster.window_start.date_naive());
    let earliest = day - Duration::days(lookback_days);
    let features = cluster.link_features();
    let mut best: Option<(f64, StoryId)> = None;
    for s in stories {
        if s.language != cluster.language {
            continue;
        }
        let Some(last) = s.last_day() else { continue };
        if last >= day || last < earliest {
            continue;
        }
        let cos = feature_cosine(&features, &s.last_features);
        if cos < LINK_THRESHOLD {
            continue;
        }
        let better = match best {
            None => true,
            Some((bc, bid)) => cos > bc || (cos == bc && s.id < bid),
        };
        if better {
            best = Some((cos, s.id));
        }
    }
    best.map(|(_, id)| id)
}

/// Owns every story and links daily clusters into them.
#[derive(Debug, Clone, Default)]
pub struct StoryTracker {
    stories: BTreeMap<StoryId, Story>,
    lookback_days: i64,
}

impl StoryTracker {
    pub fn new(lookback_days: i64) -> Self {
        Self { stories: BTreeMap::new(), lookback_days }
    }

    pub fn with_stories(lookback_days: i64, stories: impl IntoIterator<Item = Story>) -> Self {
        Self { stories: stories.into_iter().map(|s| (s.id, s)).collect(), lookback_days }
    }

    pub fn stories(&self) -> impl Iterator<Item = &Story> {
        self.stories.values()
    }

    pub fn get(&self, id: StoryId) -> Option<&Story> {
        self.stories.get(&id)
    }

    /// Attaches one day's clusters (all languages) to stories, largest
    /// clusters first, then records cross-lingual links between the day's
    /// clusters. Sets `story_id` on every cluster.
    pub fn add_day(&mut self, clusters: &mut [Cluster], ids: &IdSource) {
        let mut order: Vec<usize> = (0..clusters.len()).collect();
        order.sort_by(|&a, &b| clusters[b].size().cmp(&clusters[a].size()).then(clusters[a].id.cmp(&clusters[b].id)));
        for i in order {
            let id = self.attach(&clusters[i], ids);
            clusters[i].story_id = Some(id);
        }
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                if link_cross_lingual(&clusters[i], &clusters[j]) {
                    let (a, b) = (clusters[i].story_id.expect("attached"), clusters[j].story_id.expect("attached"));
                    let (la, lb) = (clusters[i].language.clone(), clusters[j].language.clone());
                    if let Some(s) = self.stories.get_mut(&a) {
                        s.cross_links.insert((lb, b));
                    }
                    if let Some(s) = self.stories.get_mut(&b) {
                        s.cross_links.insert((la, a));
                    }
                }
            }
        }
    }

    fn attach(&mut self, cluster: &Cluster, ids: &IdSource) -> StoryId {
        let day = cluster.day.unwrap_or_else(|| cluster.window_start.date_naive());
        let id = attach_to_story(cluster, self.stories.values(), self.lookback_days).unwrap_or_else(|| {
            let id = ids.next_id();
            self.stories.insert(
                id,
                Story {
                    id,
                    language: cluster.language.clone(),
                    daily_cluster_ids: BTreeMap::new(),
                    title_per_day: BTreeMap::new(),
                    size_per_day: BTreeMap::new(),
                    cross_links: BTreeSet::new(),
                    last_features: LinkFeatures::default(),
                },
            );
            id
        });
        let story = self.stories.get_mut(&id).expect("story exists");
        story.daily_cluster_ids.insert(day, cluster.id);
        story.title_per_day.insert(day, cluster.title.clone());
        story.size_per_day.insert(day, cluster.size());
        story.last_features = cluster.link_features();
        id
    }
}
