//! Domain types shared by every pipeline stage.
//!
//! All values are immutable after construction and validated on the way in,
//! so downstream stages can rely on the invariants documented per type.

mod config;
pub mod io;
mod ledger;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{BandwidthRule, RunConfig};
pub use ledger::{DropReason, Ledger, LedgerEntry, Verdict};

/// Tolerance on the sum of a probability vector.
pub const PROB_SUM_TOLERANCE: f64 = 1e-3;

/// One multiple-choice item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub question: String,
    pub options: Vec<String>,
    #[serde(rename = "answer_index")]
    pub gold_index: usize,
    #[serde(default)]
    pub subset: Option<String>,
}

impl Example {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Error::Parse {
            what: "dataset",
            line: 0,
            message: format!("example {:?}: {msg}", self.id),
        };
        if self.id.is_empty() {
            return Err(invalid("empty id"));
        }
        if self.options.len() < 2 {
            return Err(invalid("needs at least 2 options"));
        }
        if self.options.iter().any(String::is_empty) {
            return Err(invalid("empty option text"));
        }
        if self.gold_index >= self.options.len() {
            return Err(Error::GoldIndexOutOfRange {
                id: self.id.clone(),
                gold_index: self.gold_index,
                options: self.options.len(),
            });
        }
        Ok(())
    }
}

/// A validated set of examples, canonically ordered by id.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    examples: Vec<Example>,
    index: HashMap<String, usize>,
}

impl Dataset {
    /// Validates every example and rejects duplicate ids. The input order is
    /// discarded: examples are stored sorted by id.
    pub fn new(examples: Vec<Example>) -> Result<Self> {
        let mut index = HashMap::with_capacity(examples.len());
        for (pos, example) in examples.iter().enumerate() {
            example.validate().map_err(|e| match e {
                Error::Parse { what, message, .. } => Error::Parse {
                    what,
                    line: pos + 1,
                    message,
                },
                other => other,
            })?;
            if index.insert(example.id.clone(), pos).is_some() {
                return Err(Error::DuplicateId {
                    id: example.id.clone(),
                    line: pos + 1,
                });
            }
        }
        let mut examples = examples;
        examples.sort_by(|a, b| a.id.cmp(&b.id));
        let index = examples
            .iter()
            .enumerate()
            .map(|(pos, e)| (e.id.clone(), pos))
            .collect();
        Ok(Dataset { examples, index })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn get(&self, id: &str) -> Option<&Example> {
        self.index.get(id).map(|&pos| &self.examples[pos])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|e| e.id.as_str())
    }
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.examples == other.examples
    }
}

/// How the model was prompted when the probabilities were recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    /// Question and lettered options.
    FullPrompt,
    /// Lettered options only, question text removed.
    ChoicesOnly,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::FullPrompt => "full_prompt",
            PromptMode::ChoicesOnly => "choices_only",
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_prompt" => Ok(PromptMode::FullPrompt),
            "choices_only" => Ok(PromptMode::ChoicesOnly),
            other => Err(Error::UnknownMode(other.to_string())),
        }
    }
}

/// Per-example option probabilities recorded for one model in one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub model: String,
    pub mode: PromptMode,
    pub entries: BTreeMap<String, Vec<f64>>,
}

impl PredictionSet {
    pub fn probs(&self, example_id: &str) -> Option<&[f64]> {
        self.entries.get(example_id).map(Vec::as_slice)
    }

    /// Looks up the probability vector for `example`, checking coverage and
    /// length against the example's option count.
    pub fn probs_for(&self, example: &Example) -> Result<&[f64]> {
        let probs = self.probs(&example.id).ok_or_else(|| Error::Coverage {
            model: self.model.clone(),
            mode: self.mode.as_str(),
            example_id: example.id.clone(),
        })?;
        if probs.len() != example.options.len() {
            return Err(Error::VectorLength {
                model: self.model.clone(),
                example_id: example.id.clone(),
                got: probs.len(),
                expected: example.options.len(),
            });
        }
        Ok(probs)
    }
}

/// Index of the strictly largest entry, or `None` when the maximum is shared
/// (or the slice is empty).
pub fn unique_argmax(probs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    let mut tied = false;
    for (i, &p) in probs.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if p > probs[b] => {
                best = Some(i);
                tied = false;
            }
            Some(b) if p == probs[b] => tied = true,
            Some(_) => {}
        }
    }
    if tied {
        None
    } else {
        best
    }
}

/// Fixed-dimension embedding vectors, one per example id.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingSet {
    /// `data` is row-major, row `i` belonging to `ids[i]`.
    pub fn new(dim: usize, ids: Vec<String>, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::ManifestLength {
                count: data.len() / dim,
                manifest: ids.len(),
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            if id.is_empty() {
                return Err(Error::parse("manifest", row + 1, "empty id"));
            }
            if index.insert(id.clone(), row).is_some() {
                return Err(Error::DuplicateId {
                    id: id.clone(),
                    line: row + 1,
                });
            }
            let vector = &data[row * dim..(row + 1) * dim];
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::parse("embeddings", row + 1, "non-finite component"));
            }
            if vector.iter().all(|&x| x == 0.0) {
                return Err(Error::ZeroVector { id: id.clone() });
            }
        }
        Ok(EmbeddingSet {
            dim,
            ids,
            data,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Ids in row order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn vector(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&row| self.row(row))
    }

    pub(crate) fn raw(&self) -> &[f32] {
        &self.data
    }
}

impl PartialEq for EmbeddingSet {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.ids == other.ids
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Human-preference scores per model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EloTable {
    pub scores: BTreeMap<String, f64>,
}

impl EloTable {
    pub fn get(&self, model: &str) -> Option<f64> {
        self.scores.get(model).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(id: &str, gold: usize, options: usize) -> Example {
        Example {
            id: id.into(),
            question: "q".into(),
            options: (0..options).map(|i| format!("opt{i}")).collect(),
            gold_index: gold,
            subset: None,
        }
    }

    #[test]
    fn argmax_requires_unique_maximum() {
        assert_eq!(unique_argmax(&[0.1, 0.6, 0.3]), Some(1));
        assert_eq!(unique_argmax(&[0.4, 0.4, 0.2]), None);
        assert_eq!(unique_argmax(&[0.2, 0.4, 0.4]), None);
        assert_eq!(unique_argmax(&[0.4, 0.2, 0.4, 0.0]), None);
        assert_eq!(unique_argmax(&[0.5, 0.5, 0.9]), Some(2));
        assert_eq!(unique_argmax(&[]), None);
    }

    #[test]
    fn dataset_sorts_and_indexes() {
        let ds = Dataset::new(vec![example("b", 0, 2), example("a", 1, 3)]).unwrap();
        assert_eq!(ds.ids().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(ds.get("a").unwrap().options.len(), 3);
    }

    #[test]
    fn dataset_rejects_duplicate_and_out_of_range() {
        let err = Dataset::new(vec![example("q1", 0, 2), example("q1", 0, 2)]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId { line: 2, .. }));
        let err = Dataset::new(vec![example("q1", 4, 4)]).unwrap_err();
        assert!(err.to_string().contains("gold_index out of range"));
    }

    #[test]
    fn embedding_set_rejects_zero_rows() {
        let err = EmbeddingSet::new(2, vec!["a".into(), "b".into()], vec![1.0, 0.0, 0.0, 0.0])
            .unwrap_err();
        assert!(matches!(err, Error::ZeroVector { ref id } if id == "b"));
    }

    #[test]
    fn mode_strings() {
        assert_eq!(
            "choices_only".parse::<PromptMode>().unwrap(),
            PromptMode::ChoicesOnly
        );
        assert_eq!(
            "full_prompt".parse::<PromptMode>().unwrap(),
            PromptMode::FullPrompt
        );
        assert!(matches!(
            "question_only".parse::<PromptMode>(),
            Err(Error::UnknownMode(_))
        ));
    }
}
