//! Exact-duplicate and anomalous-subset removal, applied before the three
//! filtering steps.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{Dataset, Example};

/// Separator between the normalized question and options in a canonical key.
const KEY_SEPARATOR: char = '\u{1f}';

/// Examples sharing one canonical key. Only `kept_id` survives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateGroup {
    pub canonical_key: String,
    /// Sorted, at least two members.
    pub member_ids: Vec<String>,
    pub kept_id: String,
    /// Members disagree on the gold answer.
    pub gold_conflict: bool,
}

impl DuplicateGroup {
    pub fn removed_ids(&self) -> impl Iterator<Item = &str> {
        self.member_ids
            .iter()
            .map(String::as_str)
            .filter(move |id| *id != self.kept_id)
    }
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Question and options with whitespace runs collapsed, case and option
/// order preserved. The gold index is not part of the key.
pub fn canonical_key(example: &Example) -> String {
    let mut key = collapse_whitespace(&example.question);
    for option in &example.options {
        key.push(KEY_SEPARATOR);
        key.push_str(&collapse_whitespace(option));
    }
    key
}

/// Groups examples with identical canonical keys. The lexicographically
/// smallest id of each group is kept.
pub fn find_exact_duplicates(dataset: &Dataset) -> Vec<DuplicateGroup> {
    let mut by_key: BTreeMap<String, Vec<&Example>> = BTreeMap::new();
    for example in dataset.examples() {
        by_key
            .entry(canonical_key(example))
            .or_default()
            .push(example);
    }
    let mut groups: Vec<DuplicateGroup> = by_key
        .into_iter()
        .filter(|(_, members)| members.len() > 1)
        .map(|(canonical_key, mut members)| {
            members.sort_by(|a, b| a.id.cmp(&b.id));
            let gold = members[0].gold_index;
            DuplicateGroup {
                canonical_key,
                kept_id: members[0].id.clone(),
                gold_conflict: members.iter().any(|m| m.gold_index != gold),
                member_ids: members.iter().map(|m| m.id.clone()).collect(),
            }
        })
        .collect();
    groups.sort_by(|a, b| a.kept_id.cmp(&b.kept_id));
    groups
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnomalousSelection {
    pub ids: BTreeSet<String>,
    /// Configured subset names with no examples in the dataset.
    pub unknown_subsets: Vec<String>,
}

/// Selects every example whose subset is listed. Unknown names are reported,
/// not fatal.
pub fn remove_anomalous_subsets(
    dataset: &Dataset,
    anomalous_subsets: &[String],
) -> AnomalousSelection {
    let wanted: BTreeSet<&str> = anomalous_subsets.iter().map(String::as_str).collect();
    let present: BTreeSet<&str> = dataset
        .examples()
        .iter()
        .filter_map(|e| e.subset.as_deref())
        .collect();
    let ids = dataset
        .examples()
        .iter()
        .filter(|e| e.subset.as_deref().is_some_and(|s| wanted.contains(s)))
        .map(|e| e.id.clone())
        .collect();
    let unknown_subsets = wanted
        .iter()
        .filter(|name| !present.contains(*name))
        .map(|name| name.to_string())
        .collect();
    AnomalousSelection {
        ids,
        unknown_subsets,
    }
}

/// Combined prefilter result.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrefilterOutcome {
    pub duplicate_groups: Vec<DuplicateGroup>,
    pub anomalous: BTreeSet<String>,
    pub warnings: Vec<String>,
}

impl PrefilterOutcome {
    pub fn run(dataset: &Dataset, anomalous_subsets: &[String]) -> Self {
        let duplicate_groups = find_exact_duplicates(dataset);
        let selection = remove_anomalous_subsets(dataset, anomalous_subsets);
        let warnings = selection
            .unknown_subsets
            .iter()
            .map(|name| format!("anomalous subset {name:?} not present in the dataset"))
            .collect();
        PrefilterOutcome {
            duplicate_groups,
            anomalous: selection.ids,
            warnings,
        }
    }

    /// Removed duplicate id -> surviving id.
    pub fn duplicates(&self) -> BTreeMap<&str, &str> {
        self.duplicate_groups
            .iter()
            .flat_map(|g| g.removed_ids().map(move |id| (id, g.kept_id.as_str())))
            .collect()
    }

    pub fn gold_conflicts(&self) -> BTreeSet<&str> {
        self.duplicate_groups
            .iter()
            .filter(|g| g.gold_conflict)
            .flat_map(|g| g.member_ids.iter().map(String::as_str))
            .collect()
    }

    /// Examples that survive prefiltering, in id order.
    pub fn candidates<'a>(&self, dataset: &'a Dataset) -> Vec<&'a Example> {
        let dups = self.duplicates();
        dataset
            .examples()
            .iter()
            .filter(|e| !dups.contains_key(e.id.as_str()) && !self.anomalous.contains(&e.id))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(
        id: &str,
        question: &str,
        options: &[&str],
        gold: usize,
        subset: Option<&str>,
    ) -> Example {
        Example {
            id: id.into(),
            question: question.into(),
            options: options.iter().map(|s| s.to_string()).collect(),
            gold_index: gold,
            subset: subset.map(String::from),
        }
    }

    #[test]
    fn whitespace_is_collapsed_but_case_and_order_kept() {
        let a = ex("a", "What is  X?", &["1", "2"], 0, None);
        let b = ex("b", " What is\tX? ", &["1", "2"], 1, None);
        assert_eq!(canonical_key(&a), canonical_key(&b));
        let swapped = ex("c", "What is X?", &["2", "1"], 0, None);
        assert_ne!(canonical_key(&a), canonical_key(&swapped));
        let upper = ex("d", "WHAT is X?", &["1", "2"], 0, None);
        assert_ne!(canonical_key(&a), canonical_key(&upper));
    }

    #[test]
    fn separator_prevents_boundary_collisions() {
        let a = ex("a", "ab", &["c", "d"], 0, None);
        let b = ex("b", "a", &["bc", "d"], 0, None);
        assert_ne!(canonical_key(&a), canonical_key(&b));
    }

    #[test]
    fn three_identical_records_form_one_group() {
        let ds = Dataset::new(vec![
            ex("q3", "Same?", &["x", "y"], 0, None),
            ex("q1", "Same?", &["x", "y"], 0, None),
            ex("q2", "Same?", &["x", "y"], 1, None),
            ex("q4", "Other?", &["x", "y"], 0, None),
        ])
        .unwrap();
        let groups = find_exact_duplicates(&ds);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].kept_id, "q1");
        assert_eq!(groups[0].member_ids, ["q1", "q2", "q3"]);
        assert!(groups[0].gold_conflict);
        assert_eq!(groups[0].removed_ids().collect::<Vec<_>>(), ["q2", "q3"]);
    }

    #[test]
    fn no_repeats_no_groups() {
        let ds = Dataset::new(vec![
            ex("a", "One?", &["x", "y"], 0, None),
            ex("b", "Two?", &["x", "y"], 0, None),
        ])
        .unwrap();
        assert!(find_exact_duplicates(&ds).is_empty());
    }

    #[test]
    fn anomalous_subsets() {
        let ds = Dataset::new(vec![
            ex("a", "One?", &["x", "y"], 0, Some("moral_scenarios")),
            ex("b", "Two?", &["x", "y"], 0, Some("physics")),
            ex("c", "Three?", &["x", "y"], 0, None),
        ])
        .unwrap();
        let sel = remove_anomalous_subsets(&ds, &["moral_scenarios".into()]);
        assert_eq!(sel.ids.into_iter().collect::<Vec<_>>(), ["a"]);
        assert!(sel.unknown_subsets.is_empty());

        assert!(remove_anomalous_subsets(&ds, &[]).ids.is_empty());

        let sel = remove_anomalous_subsets(&ds, &["astrology".into()]);
        assert!(sel.ids.is_empty());
        assert_eq!(sel.unknown_subsets, ["astrology"]);
        let outcome = PrefilterOutcome::run(&ds, &["astrology".into()]);
        assert_eq!(outcome.warnings.len(), 1);
    }

    #[test]
    fn candidates_exclude_flagged() {
        let ds = Dataset::new(vec![
            ex("a", "Same?", &["x", "y"], 0, None),
            ex("b", "Same?", &["x", "y"], 0, None),
            ex("c", "Odd?", &["x", "y"], 0, Some("weird")),
            ex("d", "Fine?", &["x", "y"], 0, None),
        ])
        .unwrap();
        let outcome = PrefilterOutcome::run(&ds, &["weird".into()]);
        let ids: Vec<&str> = outcome
            .candidates(&ds)
            .iter()
            .map(|e| e.id.as_str())
            .collect();
        assert_eq!(ids, ["a", "d"]);
    }
}
