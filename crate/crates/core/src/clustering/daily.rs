use std::collections::HashMap;

use chrono::{DateTime, NaiveDate, Utc};

use super::agglomerative::{centroid, cluster_window, select_medoid};
use super::vector::{vectorize, DocVector, TermDoc};
use super::window::{tally, WindowDoc};
use super::{Cluster, ClusterKind};
use crate::types::{ArticleId, IdSource};

/// Clusters one language's articles of one calendar day. Clusters are
/// numbered in order of their smallest member id.
pub fn daily_clusters(language: &str, day: NaiveDate, docs: &[WindowDoc], threshold: f64, ids: &IdSource) -> Vec<Cluster> {
    let term_docs: Vec<TermDoc> = docs
        .iter()
        .map(|d| TermDoc { article_id: d.article_id, term_counts: d.term_counts.clone() })
        .collect();
    let vectors = vectorize(&term_docs).vectors;
    let by_id: HashMap<ArticleId, (&DocVector, &WindowDoc)> = vectors
        .iter()
        .map(|v| (v.article_id, (v, docs.iter().find(|d| d.article_id == v.article_id).expect("vector from doc"))))
        .collect();
    cluster_window(&vectors, threshold)
        .into_iter()
        .map(|members| {
            let parts: Vec<(&DocVector, &WindowDoc)> = members.iter().map(|m| by_id[m]).collect();
            let with_time: Vec<(&DocVector, DateTime<Utc>)> = parts.iter().map(|(v, d)| (*v, d.published_at)).collect();
            let medoid_id = select_medoid(&with_time).expect("non-empty cluster");
            let times = parts.iter().map(|(_, d)| d.published_at);
            Cluster {
                id: ids.next_id(),
                kind: ClusterKind::Daily,
                language: language.to_string(),
                centroid: centroid(&parts.iter().map(|(v, _)| *v).collect::<Vec<_>>()),
                medoid_id,
                title: by_id[&medoid_id].1.title.clone(),
                window_start: times.clone().min().expect("members"),
                window_end: times.max().expect("members"),
                categories: tally(parts.iter().flat_map(|(_, d)| d.categories.iter().cloned())),
                entities: tally(parts.iter().flat_map(|(_, d)| d.entity_ids.iter().copied())),
                toponyms: tally(parts.iter().flat_map(|(_, d)| d.toponym_ids.iter().copied())),
                member_ids: members,
                size_history: Vec::new(),
                live: false,
                retired_at: None,
                merged_into: None,
                day: Some(day),
                story_id: None,
            }
        })
        .collect()
}
