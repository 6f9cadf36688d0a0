use std::collections::BTreeSet;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Ledger, RunConfig};
use crate::pipeline::{apply_model_flags, prefilter_survivors, ModelFlags, Panel};
use crate::rng::{self, Stream};

/// Above this many possible subsets, draws are rejection-sampled instead of
/// enumerated.
const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationDraw {
    pub models: Vec<String>,
    pub filtered_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub subset_size: usize,
    pub draws: Vec<AblationDraw>,
    pub mean: f64,
    /// Population standard deviation over the draws.
    pub std: f64,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| {
        acc.saturating_mul((n - i) as u128) / (i as u128 + 1)
    })
}

/// Distinct `size`-subsets of `models` (given sorted): every subset when
/// there are at most `draws` of them, otherwise `draws` chosen uniformly.
pub fn draw_model_subsets<'a>(
    models: &[&'a str],
    size: usize,
    draws: usize,
    seed: u64,
) -> Result<Vec<Vec<&'a str>>> {
    if size == 0 || size > models.len() {
        return Err(Error::SubsetTooLarge {
            n: size,
            models: models.len(),
        });
    }
    if draws == 0 {
        return Err(Error::Config("ablation needs at least one draw".into()));
    }
    let total = binomial(models.len(), size);
    let mut rng = rng::seeded(seed, Stream::Ablation(size));
    if total <= draws as u128 {
        return Ok(models.iter().copied().combinations(size).collect());
    }
    if total <= ENUMERATION_LIMIT {
        let mut all: Vec<Vec<&str>> = models.iter().copied().combinations(size).collect();
        all.shuffle(&mut rng);
        all.truncate(draws);
        return Ok(all);
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(draws);
    while out.len() < draws {
        let mut picks = rand::seq::index::sample(&mut rng, models.len(), size).into_vec();
        picks.sort_unstable();
        if seen.insert(picks.clone()) {
            out.push(picks.into_iter().map(|i| models[i]).collect());
        }
    }
    Ok(out)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Re-runs easy and contamination detection for model subsets of one size,
/// reusing the prefilter and similarity flags already in `base`, and reports
/// the total filtered percentage per draw.
pub fn ablate_model_subsets(
    dataset: &Dataset,
    panel: &Panel<'_>,
    base: &Ledger,
    size: usize,
    draws: usize,
    config: &RunConfig,
) -> Result<AblationRow> {
    if base.is_empty() {
        return Err(Error::Statistic("ablation over an empty ledger".into()));
    }
    let models = panel.models();
    let subsets = draw_model_subsets(&models, size, draws, config.seed)?;
    let survivors = prefilter_survivors(dataset, base);
    let results = subsets
        .par_iter()
        .map(|subset| {
            let flags = ModelFlags::detect(
                &survivors,
                &panel.restrict(subset),
                config.confidence_threshold,
            )?;
            let ledger = apply_model_flags(base, &flags, config);
            Ok(AblationDraw {
                models: subset.iter().map(|m| m.to_string()).collect(),
                filtered_pct: 100.0 * ledger.dropped_count() as f64 / ledger.len() as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pcts: Vec<f64> = results.iter().map(|d| d.filtered_pct).collect();
    let (mean, std) = mean_std(&pcts);
    Ok(AblationRow {
        subset_size: size,
        draws: results,
        mean,
        std,
    })
}
