//! Near-duplicate detection: exact kNN under cosine distance, a density
//! derived threshold, connected components, and half-per-cluster removal.

mod cluster;
mod distance;
mod kde;
mod knn;
mod union_find;

use serde::{Deserialize, Serialize};

pub use cluster::{build_clusters, sample_cluster_removals, SimilarityCluster};
pub use distance::cosine_distance;
pub use kde::{
    evaluate_density, first_local_max, kde_threshold, silverman_bandwidth, uniform_grid,
    KdeThreshold,
};
pub use knn::{knn_pairs, knn_pairs_among, NeighborPair};

use crate::error::Result;
use crate::model::{EmbeddingSet, RunConfig};

/// Result of the similarity step over a set of candidate examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityOutcome {
    pub k: usize,
    pub pair_count: usize,
    /// Absent when fewer than two candidates exist.
    pub threshold: Option<KdeThreshold>,
    pub clusters: Vec<SimilarityCluster>,
    /// Distribution of all neighbour-pair distances.
    pub histogram: Vec<HistogramBin>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

pub const HISTOGRAM_BINS: usize = 50;

/// Equal-width bins over `[min, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    let Some(lo) = values.iter().copied().reduce(f64::min) else {
        return Vec::new();
    };
    let hi = values.iter().copied().fold(lo, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let slot = if width > 0.0 {
            ((v - lo) / width) as usize
        } else {
            0
        };
        counts[slot.min(bins - 1)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lo: lo + width * i as f64,
            hi: if i + 1 == bins {
                hi
            } else {
                lo + width * (i + 1) as f64
            },
            count,
        })
        .collect()
}

impl SimilarityOutcome {
    pub fn delta(&self) -> Option<f64> {
        self.threshold.as_ref().map(|t| t.delta)
    }
}

/// Runs the full similarity step over `candidate_ids`.
pub fn run_similarity(
    embeddings: &EmbeddingSet,
    candidate_ids: &[&str],
    config: &RunConfig,
) -> Result<SimilarityOutcome> {
    let mut warnings = Vec::new();
    if candidate_ids.len() < 2 {
        warnings.push("fewer than two candidates; similarity step skipped".to_string());
        return Ok(SimilarityOutcome {
            k: config.knn_k,
            pair_count: 0,
            threshold: None,
            clusters: Vec::new(),
            histogram: Vec::new(),
            warnings,
        });
    }
    let pairs = knn_pairs_among(embeddings, candidate_ids, config.knn_k)?;
    let distances: Vec<f64> = pairs.iter().map(|p| p.distance).collect();
    let threshold = kde_threshold(&distances, config.kde_bandwidth, config.kde_grid_points)?;
    warnings.extend(threshold.warning.clone());
    let clusters = build_clusters(&pairs, threshold.delta);
    let clusters = sample_cluster_removals(&clusters, config.seed);
    Ok(SimilarityOutcome {
        k: config.knn_k,
        pair_count: pairs.len(),
        threshold: Some(threshold),
        clusters,
        histogram: histogram(&distances, HISTOGRAM_BINS),
        warnings,
    })
}
