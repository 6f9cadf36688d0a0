//! Easy-example detection and the seeded retention sample.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{unique_argmax, Example, PredictionSet};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EasyVerdict {
    pub example_id: String,
    /// Minimum over models of the probability on the gold option.
    pub min_correct_prob: f64,
    pub is_easy: bool,
}

/// Minimum gold probability across `sets`, and whether every model puts its
/// unique maximum on the gold option with probability above `threshold`.
pub(crate) fn unanimous_confident_gold(
    example: &Example,
    sets: &[&PredictionSet],
    threshold: f64,
) -> Result<(f64, bool)> {
    let mut min_prob = f64::INFINITY;
    let mut unanimous = true;
    for set in sets {
        let probs = set.probs_for(example)?;
        let gold = probs[example.gold_index];
        min_prob = min_prob.min(gold);
        unanimous &= unique_argmax(probs) == Some(example.gold_index) && gold > threshold;
    }
    Ok((min_prob, unanimous))
}

/// An example is easy when every model answers it correctly (unique argmax on
/// the gold option) with probability strictly above `threshold`.
pub fn detect_easy(
    examples: &[&Example],
    full_prompt_sets: &[&PredictionSet],
    threshold: f64,
) -> Result<Vec<EasyVerdict>> {
    if full_prompt_sets.is_empty() {
        return Err(Error::NoModels("full_prompt"));
    }
    examples
        .iter()
        .map(|example| {
            let (min_correct_prob, is_easy) =
                unanimous_confident_gold(example, full_prompt_sets, threshold)?;
            Ok(EasyVerdict {
                example_id: example.id.clone(),
                min_correct_prob,
                is_easy,
            })
        })
        .collect()
}

/// `round(fraction * eligible)`, halves rounded up.
pub fn retained_count(eligible: usize, fraction: f64) -> usize {
    // The epsilon absorbs representation error in products like 0.1 * 25.
    (fraction * eligible as f64 + 0.5 + 1e-9).floor() as usize
}

/// Keeps the first `retained_count` ids of a seeded shuffle of the sorted
/// eligible ids.
pub fn sample_retained<'a>(
    eligible: impl IntoIterator<Item = &'a str>,
    retention_fraction: f64,
    seed: u64,
) -> BTreeSet<String> {
    let ids: Vec<&str> = eligible
        .into_iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = retained_count(ids.len(), retention_fraction).min(ids.len());
    let shuffled = rng::sorted_shuffle(ids, &mut rng::seeded(seed, Stream::Retention));
    shuffled.into_iter().take(n).map(String::from).collect()
}
