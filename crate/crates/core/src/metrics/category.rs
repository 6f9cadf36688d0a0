use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::Ledger;

/// Label used for examples without a subset.
pub const NO_SUBSET: &str = "(none)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub subset: String,
    pub original: usize,
    pub kept: usize,
    pub removed_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    /// Sorted by subset name.
    pub rows: Vec<CategoryRow>,
    pub total: CategoryRow,
}

fn row(subset: String, original: usize, kept: usize) -> CategoryRow {
    let removed_pct = if original == 0 {
        0.0
    } else {
        100.0 * (original - kept) as f64 / original as f64
    };
    CategoryRow {
        subset,
        original,
        kept,
        removed_pct,
    }
}

/// Per-subset original and kept counts.
pub fn category_report(ledger: &Ledger) -> CategoryReport {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for entry in &ledger.entries {
        let slot = counts
            .entry(entry.subset.as_deref().unwrap_or(NO_SUBSET))
            .or_default();
        slot.0 += 1;
        slot.1 += usize::from(entry.is_kept());
    }
    CategoryReport {
        rows: counts
            .into_iter()
            .map(|(name, (original, kept))| row(name.to_string(), original, kept))
            .collect(),
        total: row("total".into(), ledger.len(), ledger.kept_count()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LedgerEntry;

    fn entry(id: &str, subset: Option<&str>, anomalous: bool) -> LedgerEntry {
        let mut e = LedgerEntry::new(id, subset.map(String::from));
        e.anomalous = anomalous;
        e.settle();
        e
    }

    #[test]
    fn partitions_the_ledger() {
        let ledger = Ledger {
            entries: vec![
                entry("a", Some("moral_scenarios"), true),
                entry("b", Some("moral_scenarios"), true),
                entry("c", Some("physics"), false),
                entry("d", None, false),
                entry("e", Some("physics"), true),
            ],
        };
        let report = category_report(&ledger);
        let by_name: BTreeMap<_, _> = report.rows.iter().map(|r| (r.subset.as_str(), r)).collect();
        assert_eq!(by_name["moral_scenarios"].removed_pct, 100.0);
        assert_eq!(by_name["physics"].removed_pct, 50.0);
        assert_eq!(by_name[NO_SUBSET].removed_pct, 0.0);
        assert_eq!(
            report.rows.iter().map(|r| r.kept).sum::<usize>(),
            report.total.kept
        );
        assert_eq!(report.total.original, 5);
        assert_eq!(report.total.kept, 2);
    }
}
