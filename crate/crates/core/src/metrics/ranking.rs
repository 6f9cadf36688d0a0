use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{unique_argmax, Dataset, PredictionSet};

/// Accuracies within this distance share a rank.
pub const RANK_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub model: String,
    pub accuracy: f64,
    pub rank: usize,
}

/// Models ordered by descending accuracy with competition ranks
/// (1, 2, 2, 4, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub entries: Vec<RankedModel>,
}

impl Ranking {
    pub fn from_accuracies<S: Into<String>>(
        accuracies: impl IntoIterator<Item = (S, f64)>,
    ) -> Self {
        let mut rows: Vec<(String, f64)> =
            accuracies.into_iter().map(|(m, a)| (m.into(), a)).collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut entries: Vec<RankedModel> = Vec::with_capacity(rows.len());
        for (pos, (model, accuracy)) in rows.into_iter().enumerate() {
            let rank = match entries.last() {
                Some(prev) if (prev.accuracy - accuracy).abs() <= RANK_TIE_TOLERANCE => prev.rank,
                _ => pos + 1,
            };
            entries.push(RankedModel {
                model,
                accuracy,
                rank,
            });
        }
        Ranking { entries }
    }

    pub fn rank_of(&self, model: &str) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.model == model)
            .map(|e| e.rank)
    }

    pub fn accuracy_of(&self, model: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.model == model)
            .map(|e| e.accuracy)
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.model.as_str())
    }
}

/// Fraction of `example_ids` whose unique argmax is the gold option.
pub fn accuracy(
    predictions: &PredictionSet,
    dataset: &Dataset,
    example_ids: &[&str],
) -> Result<f64> {
    if example_ids.is_empty() {
        return Err(Error::Statistic(
            "accuracy over an empty example set".into(),
        ));
    }
    let mut correct = 0usize;
    for id in example_ids {
        let example = dataset.get(id).ok_or_else(|| Error::Coverage {
            model: "dataset".into(),
            mode: "dataset",
            example_id: id.to_string(),
        })?;
        let probs = predictions.probs_for(example)?;
        if unique_argmax(probs) == Some(example.gold_index) {
            correct += 1;
        }
    }
    Ok(correct as f64 / example_ids.len() as f64)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::{Example, PromptMode};

    #[test]
    fn competition_ranks() {
        let r = Ranking::from_accuracies([("a", 0.83), ("b", 0.819), ("c", 0.819), ("d", 0.788)]);
        let ranks: Vec<_> = r
            .entries
            .iter()
            .map(|e| (e.model.as_str(), e.rank))
            .collect();
        assert_eq!(ranks, [("a", 1), ("b", 2), ("c", 2), ("d", 4)]);
        let r = Ranking::from_accuracies([("x", 0.5), ("y", 0.5 + 1e-12)]);
        assert_eq!(r.rank_of("x"), Some(1));
        assert_eq!(r.rank_of("y"), Some(1));
    }

    fn dataset() -> Dataset {
        Dataset::new(
            (0..4)
                .map(|i| Example {
                    id: format!("q{i}"),
                    question: "?".into(),
                    options: vec!["a".into(), "b".into()],
                    gold_index: 0,
                    subset: None,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn accuracy_counts_unique_argmax() {
        let ds = dataset();
        let entries: BTreeMap<String, Vec<f64>> = [
            ("q0", vec![0.9, 0.1]),
            ("q1", vec![0.6, 0.4]),
            ("q2", vec![0.7, 0.3]),
            ("q3", vec![0.2, 0.8]),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let set = PredictionSet {
            model: "m".into(),
            mode: PromptMode::FullPrompt,
            entries,
        };
        let ids: Vec<&str> = ds.ids().collect();
        assert_eq!(accuracy(&set, &ds, &ids).unwrap(), 0.75);
        assert_eq!(accuracy(&set, &ds, &ids[..3]).unwrap(), 1.0);
        assert!(accuracy(&set, &ds, &[]).is_err());
    }
}
