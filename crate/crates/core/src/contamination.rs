//! Choices-only contamination detection and the wrong-ground-truth
//! diagnostic.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::easy::unanimous_confident_gold;
use crate::error::{Error, Result};
use crate::model::{unique_argmax, Example, PredictionSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationVerdict {
    pub example_id: String,
    pub min_correct_prob_choices_only: f64,
    pub is_contaminated: bool,
}

/// Flags examples that every model answers correctly with probability above
/// `threshold` when shown only the answer options.
pub fn detect_contaminated(
    examples: &[&Example],
    choices_only_sets: &[&PredictionSet],
    threshold: f64,
) -> Result<Vec<ContaminationVerdict>> {
    if choices_only_sets.is_empty() {
        return Err(Error::NoModels("choices_only"));
    }
    examples
        .iter()
        .map(|example| {
            let (min_prob, unanimous) =
                unanimous_confident_gold(example, choices_only_sets, threshold)?;
            Ok(ContaminationVerdict {
                example_id: example.id.clone(),
                min_correct_prob_choices_only: min_prob,
                is_contaminated: unanimous,
            })
        })
        .collect()
}

/// Examples where every model's unique argmax is a non-gold option held with
/// probability above `threshold`. The models may disagree on which wrong
/// option. Diagnostic only: these examples are never dropped for it.
pub fn flag_wrong_ground_truth(
    examples: &[&Example],
    full_prompt_sets: &[&PredictionSet],
    threshold: f64,
) -> BTreeSet<String> {
    if full_prompt_sets.is_empty() {
        return BTreeSet::new();
    }
    examples
        .iter()
        .filter(|example| {
            full_prompt_sets.iter().all(|set| {
                let Ok(probs) = set.probs_for(example) else {
                    return false;
                };
                matches!(unique_argmax(probs), Some(top) if top != example.gold_index && probs[top] > threshold)
            })
        })
        .map(|example| example.id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::PromptMode;

    fn example(gold: usize) -> Example {
        Example {
            id: "q".into(),
            question: "?".into(),
            options: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            gold_index: gold,
            subset: None,
        }
    }

    fn set(i: usize, mode: PromptMode, probs: [f64; 4]) -> PredictionSet {
        PredictionSet {
            model: format!("m{i}"),
            mode,
            entries: BTreeMap::from([("q".to_string(), probs.to_vec())]),
        }
    }

    #[test]
    fn one_dissenting_model_breaks_contamination() {
        let mut sets: Vec<_> = (0..6)
            .map(|i| set(i, PromptMode::ChoicesOnly, [0.9, 0.05, 0.03, 0.02]))
            .collect();
        let refs: Vec<_> = sets.iter().collect();
        let v = detect_contaminated(&[&example(0)], &refs, 0.8).unwrap();
        assert!(v[0].is_contaminated);

        sets.push(set(6, PromptMode::ChoicesOnly, [0.1, 0.7, 0.1, 0.1]));
        let refs: Vec<_> = sets.iter().collect();
        let v = detect_contaminated(&[&example(0)], &refs, 0.8).unwrap();
        assert!(!v[0].is_contaminated);
        assert_eq!(v[0].min_correct_prob_choices_only, 0.1);
    }

    #[test]
    fn wrong_ground_truth_suspects() {
        let sets: Vec<_> = (0..7)
            .map(|i| set(i, PromptMode::FullPrompt, [0.02, 0.9, 0.05, 0.03]))
            .collect();
        let refs: Vec<_> = sets.iter().collect();
        let flagged = flag_wrong_ground_truth(&[&example(2)], &refs, 0.8);
        assert!(flagged.contains("q"));

        // Different wrong options still count.
        let mixed = [
            set(0, PromptMode::FullPrompt, [0.9, 0.05, 0.03, 0.02]),
            set(1, PromptMode::FullPrompt, [0.02, 0.05, 0.03, 0.9]),
        ];
        let refs: Vec<_> = mixed.iter().collect();
        assert!(flag_wrong_ground_truth(&[&example(2)], &refs, 0.8).contains("q"));

        let mut sets: Vec<_> = (0..6)
            .map(|i| set(i, PromptMode::FullPrompt, [0.02, 0.9, 0.05, 0.03]))
            .collect();
        sets.push(set(6, PromptMode::FullPrompt, [0.05, 0.05, 0.85, 0.05]));
        let refs: Vec<_> = sets.iter().collect();
        assert!(flag_wrong_ground_truth(&[&example(2)], &refs, 0.8).is_empty());
    }
}
