//! Exact k-nearest-neighbour search under cosine distance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distance;
use crate::error::{Error, Result};
use crate::model::EmbeddingSet;

/// An unordered neighbour pair; `id_a < id_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborPair {
    pub id_a: String,
    pub id_b: String,
    pub distance: f64,
}

/// Heap entry ordered by (distance, neighbour index). Indices follow the
/// lexicographic id order, so ties at equal distance go to the smaller id.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    distance: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.index.cmp(&other.index))
    }
}

/// k nearest neighbours of every embedding row, as deduplicated pairs sorted
/// by (id_a, id_b).
pub fn knn_pairs(embeddings: &EmbeddingSet, k: usize) -> Result<Vec<NeighborPair>> {
    let ids: Vec<&str> = embeddings.ids().iter().map(String::as_str).collect();
    knn_pairs_among(embeddings, &ids, k)
}

/// Like [`knn_pairs`], restricted to the listed ids.
pub fn knn_pairs_among(
    embeddings: &EmbeddingSet,
    ids: &[&str],
    k: usize,
) -> Result<Vec<NeighborPair>> {
    if k == 0 {
        return Err(Error::Config("knn k must be at least 1".into()));
    }
    let mut ids = ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let vectors = ids
        .iter()
        .map(|id| {
            embeddings.vector(id).ok_or_else(|| Error::Coverage {
                model: "embeddings".into(),
                mode: "embedding",
                example_id: id.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let norms: Vec<f64> = vectors.iter().map(|v| distance::norm(v)).collect();
    let n = vectors.len();

    let neighbours: Vec<Vec<Candidate>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut heap = BinaryHeap::with_capacity(k + 1);
            for j in (0..n).filter(|&j| j != i) {
                let d =
                    distance::from_parts(distance::dot(vectors[i], vectors[j]), norms[i], norms[j]);
                let cand = Candidate {
                    distance: d,
                    index: j,
                };
                if heap.len() < k {
                    heap.push(cand);
                } else if cand < *heap.peek().expect("heap is full") {
                    heap.pop();
                    heap.push(cand);
                }
            }
            heap.into_vec()
        })
        .collect();

    let mut pairs: Vec<(usize, usize, f64)> = neighbours
        .iter()
        .enumerate()
        .flat_map(|(i, list)| {
            list.iter()
                .map(move |c| (i.min(c.index), i.max(c.index), c.distance))
        })
        .collect();
    pairs.sort_unstable_by_key(|p| (p.0, p.1));
    pairs.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);

    Ok(pairs
        .into_iter()
        .map(|(a, b, distance)| NeighborPair {
            id_a: ids[a].to_string(),
            id_b: ids[b].to_string(),
            distance,
        })
        .collect())
}
