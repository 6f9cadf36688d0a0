//! Connected components of the similar-pair graph and the seeded
//! half-per-cluster removal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::knn::NeighborPair;
use super::union_find::DisjointSet;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityCluster {
    pub cluster_id: u32,
    /// Sorted, at least two members.
    pub member_ids: Vec<String>,
    /// Sorted; `floor(members / 2)` once removals are sampled.
    pub removed_ids: Vec<String>,
}

/// Connected components over pairs with `distance < delta`. Singletons are
/// dropped; clusters are numbered in order of their smallest member id.
pub fn build_clusters(pairs: &[NeighborPair], delta: f64) -> Vec<SimilarityCluster> {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let edges: Vec<(&str, &str)> = pairs
        .iter()
        .filter(|p| p.distance < delta)
        .map(|p| (p.id_a.as_str(), p.id_b.as_str()))
        .collect();
    for &(a, b) in &edges {
        let next = index.len();
        index.entry(a).or_insert(next);
        let next = index.len();
        index.entry(b).or_insert(next);
    }
    let mut sets = DisjointSet::new(index.len());
    for (a, b) in &edges {
        sets.union(index[a], index[b]);
    }
    let mut components: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    // BTreeMap iteration is in id order, so members come out sorted.
    for (id, &node) in &index {
        components
            .entry(sets.find(node))
            .or_default()
            .push(id.to_string());
    }
    let mut members: Vec<Vec<String>> = components.into_values().filter(|m| m.len() > 1).collect();
    members.sort_by(|a, b| a[0].cmp(&b[0]));
    members
        .into_iter()
        .enumerate()
        .map(|(i, member_ids)| SimilarityCluster {
            cluster_id: i as u32,
            member_ids,
            removed_ids: Vec::new(),
        })
        .collect()
}

/// For each cluster in id order, removes the first `floor(n / 2)` members of
/// a seeded shuffle of its sorted members.
pub fn sample_cluster_removals(
    clusters: &[SimilarityCluster],
    seed: u64,
) -> Vec<SimilarityCluster> {
    let mut rng = rng::seeded(seed, Stream::ClusterRemoval);
    let mut ordered: Vec<&SimilarityCluster> = clusters.iter().collect();
    ordered.sort_by_key(|c| c.cluster_id);
    ordered
        .into_iter()
        .map(|cluster| {
            let shuffled = rng::sorted_shuffle(cluster.member_ids.clone(), &mut rng);
            let mut removed: Vec<String> = shuffled
                .into_iter()
                .take(cluster.member_ids.len() / 2)
                .collect();
            removed.sort();
            SimilarityCluster {
                removed_ids: removed,
                ..cluster.clone()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: &str, b: &str, d: f64) -> NeighborPair {
        NeighborPair {
            id_a: a.into(),
            id_b: b.into(),
            distance: d,
        }
    }

    #[test]
    fn transitive_closure() {
        let pairs = [
            pair("d", "e", 0.01),
            pair("a", "b", 0.01),
            pair("b", "c", 0.02),
            pair("a", "e", 0.9),
        ];
        let clusters = build_clusters(&pairs, 0.1);
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].member_ids, ["a", "b", "c"]);
        assert_eq!(clusters[0].cluster_id, 0);
        assert_eq!(clusters[1].member_ids, ["d", "e"]);
        assert_eq!(clusters[1].cluster_id, 1);
    }

    #[test]
    fn edge_rule_is_strict() {
        assert!(build_clusters(&[pair("a", "b", 0.1)], 0.1).is_empty());
        assert_eq!(build_clusters(&[pair("a", "b", 0.0999)], 0.1).len(), 1);
    }

    #[test]
    fn removal_counts_floor_half() {
        let clusters = build_clusters(
            &[
                pair("a", "b", 0.0),
                pair("c", "d", 0.0),
                pair("d", "e", 0.0),
                pair("e", "f", 0.0),
                pair("f", "g", 0.0),
            ],
            0.5,
        );
        let removed = sample_cluster_removals(&clusters, 11);
        assert_eq!(removed[0].removed_ids.len(), 1);
        assert_eq!(removed[1].member_ids.len(), 5);
        assert_eq!(removed[1].removed_ids.len(), 2);
        for c in &removed {
            assert!(c.removed_ids.iter().all(|id| c.member_ids.contains(id)));
        }
        assert_eq!(removed, sample_cluster_removals(&clusters, 11));
    }
}
