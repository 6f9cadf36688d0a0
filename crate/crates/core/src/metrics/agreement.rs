use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, PredictionSet};

/// Pairwise fraction of examples on which two models pick the same option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementMatrix {
    pub models: Vec<String>,
    /// Row-major, `models.len()` squared.
    pub values: Vec<Vec<f64>>,
}

impl AgreementMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.models.iter().position(|m| m == a)?;
        let j = self.models.iter().position(|m| m == b)?;
        Some(self.values[i][j])
    }
}

/// Predicted option: the first index holding the maximum probability.
/// Shared maxima resolve the same way for every model, so a model always
/// agrees with itself.
pub fn predicted_option(probs: &[f64]) -> usize {
    probs
        .iter()
        .enumerate()
        .fold(0, |best, (i, &p)| if p > probs[best] { i } else { best })
}

pub fn agreement_matrix(
    sets: &[&PredictionSet],
    dataset: &Dataset,
    example_ids: &[&str],
) -> Result<AgreementMatrix> {
    if example_ids.is_empty() {
        return Err(Error::Statistic(
            "agreement over an empty example set".into(),
        ));
    }
    let mut sets = sets.to_vec();
    sets.sort_by(|a, b| a.model.cmp(&b.model));
    let choices = sets
        .iter()
        .map(|set| {
            example_ids
                .iter()
                .map(|id| {
                    let example = dataset.get(id).ok_or_else(|| Error::Coverage {
                        model: "dataset".into(),
                        mode: "dataset",
                        example_id: id.to_string(),
                    })?;
                    Ok(predicted_option(set.probs_for(example)?))
                })
                .collect::<Result<Vec<usize>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let n = sets.len();
    let total = example_ids.len() as f64;
    let mut values = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let same = choices[i]
                .iter()
                .zip(&choices[j])
                .filter(|(a, b)| a == b)
                .count();
            values[i][j] = same as f64 / total;
            values[j][i] = values[i][j];
        }
    }
    Ok(AgreementMatrix {
        models: sets.iter().map(|s| s.model.clone()).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::{Example, PromptMode};

    fn dataset(n: usize) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|i| Example {
                    id: format!("q{i:02}"),
                    question: format!("{i}?"),
                    options: vec!["a".into(), "b".into(), "c".into()],
                    gold_index: 0,
                    subset: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn set(model: &str, picks: &[usize]) -> PredictionSet {
        let entries = picks
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let mut probs = vec![0.1; 3];
                probs[p] = 0.8;
                (format!("q{i:02}"), probs)
            })
            .collect::<BTreeMap<_, _>>();
        PredictionSet {
            model: model.into(),
            mode: PromptMode::FullPrompt,
            entries,
        }
    }

    #[test]
    fn diagonal_and_disagreement() {
        let ds = dataset(4);
        let a = set("a", &[0, 0, 1, 2]);
        let b = set("b", &[1, 1, 2, 0]);
        let ids: Vec<&str> = ds.ids().collect();
        let m = agreement_matrix(&[&b, &a], &ds, &ids).unwrap();
        assert_eq!(m.models, ["a", "b"]);
        assert_eq!(m.get("a", "a"), Some(1.0));
        assert_eq!(m.get("a", "b"), Some(0.0));
        assert!(agreement_matrix(&[&a], &ds, &[]).is_err());
    }

    #[test]
    fn shared_maximum_still_agrees_with_itself() {
        assert_eq!(predicted_option(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(predicted_option(&[0.1, 0.4, 0.4]), 1);
    }

    #[test]
    fn matches_pairwise_recount() {
        let ds = dataset(20);
        let picks: Vec<Vec<usize>> = (0..4)
            .map(|m| (0..20).map(|i| (i * (m + 1) + m) % 3).collect())
            .collect();
        let sets: Vec<PredictionSet> = picks
            .iter()
            .enumerate()
            .map(|(m, p)| set(&format!("m{m}"), p))
            .collect();
        let refs: Vec<&PredictionSet> = sets.iter().collect();
        let ids: Vec<&str> = ds.ids().collect();
        let matrix = agreement_matrix(&refs, &ds, &ids).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let same = picks[a]
                    .iter()
                    .zip(&picks[b])
                    .filter(|(x, y)| x == y)
                    .count();
                assert_eq!(matrix.values[a][b], same as f64 / 20.0);
                assert_eq!(matrix.values[a][b], matrix.values[b][a]);
            }
        }
    }
}
