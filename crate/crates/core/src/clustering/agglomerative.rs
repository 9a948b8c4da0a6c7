use chrono::{DateTime, Utc};

use super::vector::{DocVector, SparseVector};
use crate::types::ArticleId;

/// Average-link agglomeration over unit vectors (`vectors` sorted by article
/// id). `groups` are pre-formed clusters of vector indices that are never
/// split. Merging continues while the best average cosine is at least
/// `threshold`; equal similarities merge the pair with the smallest
/// `(min id, min id)` key first.
pub fn agglomerate(vectors: &[DocVector], groups: Vec<Vec<usize>>, threshold: f64) -> Vec<Vec<usize>> {
    let k = groups.len();
    let key: Vec<ArticleId> = groups
        .iter()
        .map(|g| g.iter().map(|&i| vectors[i].article_id).min().unwrap_or(ArticleId::MAX))
        .collect();
    let sums: Vec<SparseVector> = groups
        .iter()
        .map(|g| SparseVector::sum(g.iter().map(|&i| &vectors[i].weights)))
        .collect();
    let mut size: Vec<f64> = groups.iter().map(|g| g.len() as f64).collect();
    let mut sim = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            let s = sums[i].dot(&sums[j]) / (size[i] * size[j]);
            sim[i * k + j] = s;
            sim[j * k + i] = s;
        }
    }
    let mut members = groups;
    let mut key = key;
    let mut active: Vec<bool> = members.iter().map(|g| !g.is_empty()).collect();
    loop {
        let mut best: Option<(f64, (ArticleId, ArticleId), usize, usize)> = None;
        for i in 0..k {
            if !active[i] {
                continue;
            }
            for j in i + 1..k {
                if !active[j] {
                    continue;
                }
                let s = sim[i * k + j];
                if s < threshold {
                    continue;
                }
                let pair = (key[i].min(key[j]), key[i].max(key[j]));
                let better = match best {
                    None => true,
                    Some((bs, bp, _, _)) => s > bs || (s == bs && pair < bp),
                };
                if better {
                    best = Some((s, pair, i, j));
                }
            }
        }
        let Some((_, _, a, b)) = best else { break };
        let (na, nb) = (size[a], size[b]);
        for c in 0..k {
            if c == a || c == b || !active[c] {
                continue;
            }
            let s = (na * sim[a * k + c] + nb * sim[b * k + c]) / (na + nb);
            sim[a * k + c] = s;
            sim[c * k + a] = s;
        }
        size[a] += nb;
        key[a] = key[a].min(key[b]);
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        active[b] = false;
    }
    let mut out: Vec<Vec<usize>> = members
        .into_iter()
        .zip(active)
        .filter(|(g, a)| *a && !g.is_empty())
        .map(|(mut g, _)| {
            g.sort_unstable();
            g
        })
        .collect();
    out.sort();
    out
}

/// Clusters one language's window. Output groups are sorted article ids,
/// ordered by their smallest id; input order does not matter.
pub fn cluster_window(vectors: &[DocVector], threshold: f64) -> Vec<Vec<ArticleId>> {
    let mut sorted: Vec<DocVector> = vectors.to_vec();
    sorted.sort_by_key(|v| v.article_id);
    let singletons = (0..sorted.len()).map(|i| vec![i]).collect();
    agglomerate(&sorted, singletons, threshold)
        .into_iter()
        .map(|g| g.into_iter().map(|i| sorted[i].article_id).collect())
        .collect()
}

/// Mean of the member vectors.
pub fn centroid(members: &[&DocVector]) -> SparseVector {
    if members.is_empty() {
        return SparseVector::default();
    }
    SparseVector::sum(members.iter().map(|d| &d.weights)).scaled(1.0 / members.len() as f64)
}

const TIE_EPS: f64 = 1e-12;

/// The member closest (by cosine) to the centroid; ties go to the earliest
/// published, then the smallest id.
pub fn select_medoid(members: &[(&DocVector, DateTime<Utc>)]) -> Option<ArticleId> {
    let vectors: Vec<&DocVector> = members.iter().map(|(v, _)| *v).collect();
    let c = centroid(&vectors);
    let mut best: Option<(f64, DateTime<Utc>, ArticleId)> = None;
    for (v, published) in members {
        let s = v.weights.cosine(&c);
        let better = match best {
            None => true,
            Some((bs, bt, bid)) => {
                if (s - bs).abs() <= TIE_EPS {
                    (*published, v.article_id) < (bt, bid)
                } else {
                    s > bs
                }
            }
        };
        if better {
            best = Some((s, *published, v.article_id));
        }
    }
    best.map(|(_, _, id)| id)
}
