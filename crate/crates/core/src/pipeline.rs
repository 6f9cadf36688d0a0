//! End-to-end filtering: prefilter, the three independent filtering steps in
//! any order, retention sampling, and per-example verdicts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::contamination::{detect_contaminated, flag_wrong_ground_truth, ContaminationVerdict};
use crate::easy::{detect_easy, sample_retained, EasyVerdict};
use crate::error::{Error, Result};
use crate::model::{
    Dataset, EmbeddingSet, Example, Ledger, LedgerEntry, PredictionSet, PromptMode, RunConfig,
};
use crate::prefilter::PrefilterOutcome;
use crate::similarity::{run_similarity, SimilarityOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmartStep {
    Easy,
    Contamination,
    Similarity,
}

impl SmartStep {
    pub const DEFAULT_ORDER: [SmartStep; 3] = [
        SmartStep::Easy,
        SmartStep::Contamination,
        SmartStep::Similarity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SmartStep::Easy => "easy",
            SmartStep::Contamination => "contamination",
            SmartStep::Similarity => "similarity",
        }
    }
}

impl fmt::Display for SmartStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SmartStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "easy" => Ok(SmartStep::Easy),
            "contamination" | "contaminated" => Ok(SmartStep::Contamination),
            "similarity" | "similar" => Ok(SmartStep::Similarity),
            other => Err(Error::Config(format!("unknown filtering step {other:?}"))),
        }
    }
}

/// Parses a comma-separated step order; it must name each step exactly once.
pub fn parse_step_order(text: &str) -> Result<Vec<SmartStep>> {
    let steps = text
        .split(',')
        .map(SmartStep::from_str)
        .collect::<Result<Vec<_>>>()?;
    let unique: BTreeSet<_> = steps.iter().collect();
    if steps.len() != 3 || unique.len() != 3 {
        return Err(Error::Config(format!(
            "step order must list easy, contamination and similarity once each, got {text:?}"
        )));
    }
    Ok(steps)
}

/// Prediction sets grouped by prompt mode, each sorted by model name.
#[derive(Debug, Clone)]
pub struct Panel<'a> {
    pub full_prompt: Vec<&'a PredictionSet>,
    pub choices_only: Vec<&'a PredictionSet>,
}

impl<'a> Panel<'a> {
    /// Every model must supply exactly one set per mode.
    pub fn new(sets: &'a [PredictionSet]) -> Result<Self> {
        let mut by_mode: BTreeMap<(PromptMode, &str), &PredictionSet> = BTreeMap::new();
        for set in sets {
            if by_mode
                .insert((set.mode, set.model.as_str()), set)
                .is_some()
            {
                return Err(Error::Config(format!(
                    "model {} has more than one {} prediction set",
                    set.model, set.mode
                )));
            }
        }
        let pick = |mode| -> Vec<&PredictionSet> {
            by_mode
                .iter()
                .filter(|((m, _), _)| *m == mode)
                .map(|(_, s)| *s)
                .collect()
        };
        let panel = Panel {
            full_prompt: pick(PromptMode::FullPrompt),
            choices_only: pick(PromptMode::ChoicesOnly),
        };
        let full: Vec<&str> = panel.full_prompt.iter().map(|s| s.model.as_str()).collect();
        let choices: Vec<&str> = panel
            .choices_only
            .iter()
            .map(|s| s.model.as_str())
            .collect();
        if full.is_empty() {
            return Err(Error::NoModels("full_prompt"));
        }
        if full != choices {
            return Err(Error::Config(format!(
                "models differ between modes: full_prompt {full:?}, choices_only {choices:?}"
            )));
        }
        Ok(panel)
    }

    pub fn models(&self) -> Vec<&'a str> {
        self.full_prompt.iter().map(|s| s.model.as_str()).collect()
    }

    /// The panel restricted to `models`.
    pub fn restrict(&self, models: &[&str]) -> Panel<'a> {
        let keep = |sets: &[&'a PredictionSet]| {
            sets.iter()
                .copied()
                .filter(|s| models.contains(&s.model.as_str()))
                .collect()
        };
        Panel {
            full_prompt: keep(&self.full_prompt),
            choices_only: keep(&self.choices_only),
        }
    }
}

/// Model-dependent flags over the prefilter survivors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelFlags {
    pub easy: BTreeSet<String>,
    pub contaminated: BTreeSet<String>,
    pub wrong_gt: BTreeSet<String>,
}

impl ModelFlags {
    pub fn detect(candidates: &[&Example], panel: &Panel<'_>, threshold: f64) -> Result<Self> {
        let easy = detect_easy(candidates, &panel.full_prompt, threshold)?;
        let contaminated = detect_contaminated(candidates, &panel.choices_only, threshold)?;
        Ok(ModelFlags {
            easy: easy
                .into_iter()
                .filter(|v| v.is_easy)
                .map(|v| v.example_id)
                .collect(),
            contaminated: contaminated
                .into_iter()
                .filter(|v| v.is_contaminated)
                .map(|v| v.example_id)
                .collect(),
            wrong_gt: flag_wrong_ground_truth(candidates, &panel.full_prompt, threshold),
        })
    }
}

/// Ledger with prefilter and similarity flags only; model flags unset.
pub fn base_ledger(
    dataset: &Dataset,
    prefilter: &PrefilterOutcome,
    similarity: &SimilarityOutcome,
) -> Ledger {
    let duplicates = prefilter.duplicates();
    let conflicts = prefilter.gold_conflicts();
    let mut cluster_of: BTreeMap<&str, u32> = BTreeMap::new();
    let mut removed: BTreeSet<&str> = BTreeSet::new();
    for cluster in &similarity.clusters {
        for id in &cluster.member_ids {
            cluster_of.insert(id, cluster.cluster_id);
        }
        removed.extend(cluster.removed_ids.iter().map(String::as_str));
    }
    let entries = dataset
        .examples()
        .iter()
        .map(|example| {
            let id = example.id.as_str();
            let mut entry = LedgerEntry::new(id, example.subset.clone());
            entry.duplicate_of = duplicates.get(id).map(|k| k.to_string());
            entry.exact_duplicate = entry.duplicate_of.is_some();
            entry.gold_conflict = conflicts.contains(id);
            entry.anomalous = prefilter.anomalous.contains(id);
            entry.similar_cluster_id = cluster_of.get(id).copied();
            entry.removed_as_similar = removed.contains(id);
            entry.settle();
            entry
        })
        .collect();
    Ledger { entries }
}

/// Applies model flags and retention sampling to a ledger, replacing any
/// previous model flags. Prefilter and similarity flags are kept as they are.
///
/// Retention draws from easy examples that no other step removes.
pub fn apply_model_flags(ledger: &Ledger, flags: &ModelFlags, config: &RunConfig) -> Ledger {
    let eligible = ledger
        .entries
        .iter()
        .filter(|e| {
            !e.is_prefiltered()
                && flags.easy.contains(&e.id)
                && !flags.contaminated.contains(&e.id)
                && !e.removed_as_similar
        })
        .map(|e| e.id.as_str());
    let retained = sample_retained(eligible, config.retention_fraction, config.seed);
    let entries = ledger
        .entries
        .iter()
        .map(|e| {
            let mut entry = e.clone();
            entry.easy = flags.easy.contains(&e.id);
            entry.retained_easy = retained.contains(&e.id);
            entry.contaminated = flags.contaminated.contains(&e.id);
            entry.wrong_gt_suspect = flags.wrong_gt.contains(&e.id);
            entry.settle();
            entry
        })
        .collect();
    Ledger { entries }
}

/// Ids of a ledger's examples that survived prefiltering.
pub fn prefilter_survivors<'a>(dataset: &'a Dataset, ledger: &Ledger) -> Vec<&'a Example> {
    ledger
        .entries
        .iter()
        .filter(|e| !e.is_prefiltered())
        .filter_map(|e| dataset.get(&e.id))
        .collect()
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub ledger: Ledger,
    pub prefilter: PrefilterOutcome,
    pub easy: Vec<EasyVerdict>,
    pub contamination: Vec<ContaminationVerdict>,
    pub similarity: SimilarityOutcome,
    pub warnings: Vec<String>,
}

/// Runs the whole filter. `order` only changes the execution sequence of the
/// three steps; each sees the same prefilter survivors, so the ledger does
/// not depend on it.
pub fn run_pipeline(
    dataset: &Dataset,
    predictions: &[PredictionSet],
    embeddings: &EmbeddingSet,
    config: &RunConfig,
    order: &[SmartStep],
) -> Result<PipelineResult> {
    config.validate()?;
    let panel = Panel::new(predictions)?;
    let prefilter = PrefilterOutcome::run(dataset, &config.anomalous_subsets);
    let candidates = prefilter.candidates(dataset);
    let candidate_ids: Vec<&str> = candidates.iter().map(|e| e.id.as_str()).collect();

    let mut easy = None;
    let mut contamination = None;
    let mut similarity = None;
    for step in order {
        log::info!("running {step} step over {} candidates", candidates.len());
        match step {
            SmartStep::Easy => {
                easy = Some(detect_easy(
                    &candidates,
                    &panel.full_prompt,
                    config.confidence_threshold,
                )?)
            }
            SmartStep::Contamination => {
                contamination = Some(detect_contaminated(
                    &candidates,
                    &panel.choices_only,
                    config.confidence_threshold,
                )?)
            }
            SmartStep::Similarity => {
                similarity = Some(run_similarity(embeddings, &candidate_ids, config)?)
            }
        }
    }
    let (Some(easy), Some(contamination), Some(similarity)) = (easy, contamination, similarity)
    else {
        return Err(Error::Config(
            "step order must include every filtering step".into(),
        ));
    };

    let flags = ModelFlags {
        easy: easy
            .iter()
            .filter(|v| v.is_easy)
            .map(|v| v.example_id.clone())
            .collect(),
        contaminated: contamination
            .iter()
            .filter(|v| v.is_contaminated)
            .map(|v| v.example_id.clone())
            .collect(),
        wrong_gt: flag_wrong_ground_truth(
            &candidates,
            &panel.full_prompt,
            config.confidence_threshold,
        ),
    };
    let ledger = apply_model_flags(
        &base_ledger(dataset, &prefilter, &similarity),
        &flags,
        config,
    );

    let mut warnings = prefilter.warnings.clone();
    warnings.extend(similarity.warnings.iter().cloned());
    Ok(PipelineResult {
        ledger,
        prefilter,
        easy,
        contamination,
        similarity,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_order_parsing() {
        assert_eq!(
            parse_step_order("similarity,easy,contamination").unwrap(),
            [
                SmartStep::Similarity,
                SmartStep::Easy,
                SmartStep::Contamination
            ]
        );
        assert!(parse_step_order("easy,easy,similarity").is_err());
        assert!(parse_step_order("easy,similarity").is_err());
        assert!(parse_step_order("easy,contamination,similarity,easy").is_err());
        assert!(parse_step_order("easy,bogus,similarity").is_err());
    }

    fn set(model: &str, mode: PromptMode) -> PredictionSet {
        PredictionSet {
            model: model.into(),
            mode,
            entries: BTreeMap::new(),
        }
    }

    #[test]
    fn panel_requires_both_modes() {
        let sets = vec![
            set("b", PromptMode::FullPrompt),
            set("a", PromptMode::ChoicesOnly),
            set("a", PromptMode::FullPrompt),
            set("b", PromptMode::ChoicesOnly),
        ];
        let panel = Panel::new(&sets).unwrap();
        assert_eq!(panel.models(), ["a", "b"]);
        assert_eq!(panel.restrict(&["b"]).models(), ["b"]);
        assert_eq!(panel.restrict(&["b"]).choices_only.len(), 1);

        assert!(Panel::new(&sets[..3]).is_err());
        let doubled = vec![
            set("a", PromptMode::FullPrompt),
            set("a", PromptMode::FullPrompt),
        ];
        assert!(Panel::new(&doubled).is_err());
    }
}
