//! Cross-file consistency checks between the dataset, prediction sets and
//! embeddings.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{Dataset, EmbeddingSet, PredictionSet, PromptMode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureReason {
    Missing,
    LengthMismatch {
        expected: usize,
        got: usize,
    },
    /// The model has predictions in one mode but not the other.
    MissingMode {
        mode: PromptMode,
    },
    DuplicateSet,
    NoPredictions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationFailure {
    /// `model/mode` for prediction sets, `embeddings` for the embedding file.
    pub set: String,
    pub example_id: Option<String>,
    pub reason: FailureReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub examples: usize,
    pub models: Vec<String>,
    pub embedding_coverage: usize,
    pub failures: Vec<ValidationFailure>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.failures.is_empty()
    }
}

fn set_name(set: &PredictionSet) -> String {
    format!("{}/{}", set.model, set.mode)
}

/// Checks that every example is covered by every prediction set (with a
/// vector of the right length) and by the embeddings, and that every model
/// has both prompt modes.
pub fn validate_alignment(
    dataset: &Dataset,
    predictions: &[PredictionSet],
    embeddings: &EmbeddingSet,
) -> ValidationReport {
    let mut report = ValidationReport {
        examples: dataset.len(),
        ..Default::default()
    };

    let mut modes: BTreeMap<&str, BTreeSet<PromptMode>> = BTreeMap::new();
    for set in predictions {
        if !modes.entry(&set.model).or_default().insert(set.mode) {
            report.failures.push(ValidationFailure {
                set: set_name(set),
                example_id: None,
                reason: FailureReason::DuplicateSet,
            });
        }
    }
    report.models = modes.keys().map(|m| m.to_string()).collect();
    if !modes.values().any(|m| m.contains(&PromptMode::FullPrompt)) {
        report.failures.push(ValidationFailure {
            set: "predictions".into(),
            example_id: None,
            reason: FailureReason::NoPredictions,
        });
    }
    for (model, present) in &modes {
        for mode in [PromptMode::FullPrompt, PromptMode::ChoicesOnly] {
            if !present.contains(&mode) {
                report.failures.push(ValidationFailure {
                    set: format!("{model}/{mode}"),
                    example_id: None,
                    reason: FailureReason::MissingMode { mode },
                });
            }
        }
    }

    for set in predictions {
        let name = set_name(set);
        for example in dataset.examples() {
            match set.probs(&example.id) {
                None => report.failures.push(ValidationFailure {
                    set: name.clone(),
                    example_id: Some(example.id.clone()),
                    reason: FailureReason::Missing,
                }),
                Some(p) if p.len() != example.options.len() => {
                    report.failures.push(ValidationFailure {
                        set: name.clone(),
                        example_id: Some(example.id.clone()),
                        reason: FailureReason::LengthMismatch {
                            expected: example.options.len(),
                            got: p.len(),
                        },
                    })
                }
                Some(_) => {}
            }
        }
        let extra = set
            .entries
            .keys()
            .filter(|id| !dataset.contains(id))
            .count();
        if extra > 0 {
            report
                .warnings
                .push(format!("{name}: {extra} row(s) for ids not in the dataset"));
        }
    }

    for example in dataset.examples() {
        if embeddings.vector(&example.id).is_some() {
            report.embedding_coverage += 1;
        } else {
            report.failures.push(ValidationFailure {
                set: "embeddings".into(),
                example_id: Some(example.id.clone()),
                reason: FailureReason::Missing,
            });
        }
    }
    let extra = embeddings
        .ids()
        .iter()
        .filter(|id| !dataset.contains(id))
        .count();
    if extra > 0 {
        report.warnings.push(format!(
            "embeddings: {extra} row(s) for ids not in the dataset"
        ));
    }
    report
}
