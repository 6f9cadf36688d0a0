use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Keep,
    Drop,
}

/// Why an example was dropped. Declaration order is the attribution
/// priority used when an example carries several reasons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    ExactDuplicate,
    Anomalous,
    Easy,
    Contaminated,
    Similar,
}

impl DropReason {
    pub const ALL: [DropReason; 5] = [
        DropReason::ExactDuplicate,
        DropReason::Anomalous,
        DropReason::Easy,
        DropReason::Contaminated,
        DropReason::Similar,
    ];

    pub fn code(self) -> &'static str {
        match self {
            DropReason::ExactDuplicate => "exact_duplicate",
            DropReason::Anomalous => "anomalous",
            DropReason::Easy => "easy",
            DropReason::Contaminated => "contaminated",
            DropReason::Similar => "similar",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Everything the pipeline decided about one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub id: String,
    pub subset: Option<String>,
    pub exact_duplicate: bool,
    /// Surviving member of this example's duplicate group, when flagged.
    pub duplicate_of: Option<String>,
    /// Set on every member of a duplicate group whose gold answers disagree.
    pub gold_conflict: bool,
    pub anomalous: bool,
    pub easy: bool,
    pub retained_easy: bool,
    pub contaminated: bool,
    pub similar_cluster_id: Option<u32>,
    pub removed_as_similar: bool,
    pub wrong_gt_suspect: bool,
    pub verdict: Verdict,
    pub drop_reasons: Vec<DropReason>,
}

impl LedgerEntry {
    pub fn new(id: impl Into<String>, subset: Option<String>) -> Self {
        LedgerEntry {
            id: id.into(),
            subset,
            exact_duplicate: false,
            duplicate_of: None,
            gold_conflict: false,
            anomalous: false,
            easy: false,
            retained_easy: false,
            contaminated: false,
            similar_cluster_id: None,
            removed_as_similar: false,
            wrong_gt_suspect: false,
            verdict: Verdict::Keep,
            drop_reasons: Vec::new(),
        }
    }

    pub fn is_kept(&self) -> bool {
        self.verdict == Verdict::Keep
    }

    pub fn is_prefiltered(&self) -> bool {
        self.exact_duplicate || self.anomalous
    }

    /// Derives the reason codes and verdict from the flags.
    pub(crate) fn settle(&mut self) {
        let mut reasons = Vec::new();
        if self.exact_duplicate {
            reasons.push(DropReason::ExactDuplicate);
        }
        if self.anomalous {
            reasons.push(DropReason::Anomalous);
        }
        if self.easy && !self.retained_easy {
            reasons.push(DropReason::Easy);
        }
        if self.contaminated {
            reasons.push(DropReason::Contaminated);
        }
        if self.removed_as_similar {
            reasons.push(DropReason::Similar);
        }
        self.verdict = if reasons.is_empty() {
            Verdict::Keep
        } else {
            Verdict::Drop
        };
        self.drop_reasons = reasons;
    }

    pub fn check(&self) -> Result<()> {
        let fail = |msg: &str| {
            Err(Error::Parse {
                what: "ledger",
                line: 0,
                message: format!("entry {:?}: {msg}", self.id),
            })
        };
        if (self.verdict == Verdict::Drop) == self.drop_reasons.is_empty() {
            return fail("verdict disagrees with drop reasons");
        }
        if self.retained_easy && !self.easy {
            return fail("retained_easy without easy");
        }
        if self.removed_as_similar && self.similar_cluster_id.is_none() {
            return fail("removed_as_similar without a cluster id");
        }
        Ok(())
    }
}

/// Per-example outcomes, one entry per dataset id, sorted by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    pub entries: Vec<LedgerEntry>,
}

impl Ledger {
    pub fn get(&self, id: &str) -> Option<&LedgerEntry> {
        self.entries
            .binary_search_by(|e| e.id.as_str().cmp(id))
            .ok()
            .map(|pos| &self.entries[pos])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn kept(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.iter().filter(|e| e.is_kept())
    }

    pub fn kept_count(&self) -> usize {
        self.kept().count()
    }

    pub fn dropped_count(&self) -> usize {
        self.len() - self.kept_count()
    }

    pub fn count(&self, pred: impl Fn(&LedgerEntry) -> bool) -> usize {
        self.entries.iter().filter(|e| pred(e)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settle_orders_reasons_and_sets_verdict() {
        let mut e = LedgerEntry::new("q1", None);
        e.settle();
        assert_eq!(e.verdict, Verdict::Keep);
        e.easy = true;
        e.contaminated = true;
        e.settle();
        assert_eq!(
            e.drop_reasons,
            vec![DropReason::Easy, DropReason::Contaminated]
        );
        assert_eq!(e.verdict, Verdict::Drop);
        e.contaminated = false;
        e.retained_easy = true;
        e.settle();
        assert!(e.is_kept());
        e.check().unwrap();
    }

    #[test]
    fn check_catches_broken_invariants() {
        let mut e = LedgerEntry::new("q1", None);
        e.retained_easy = true;
        assert!(e.check().is_err());
        let mut e = LedgerEntry::new("q2", None);
        e.removed_as_similar = true;
        e.drop_reasons = vec![DropReason::Similar];
        e.verdict = Verdict::Drop;
        assert!(e.check().is_err());
        let mut e = LedgerEntry::new("q3", None);
        e.verdict = Verdict::Drop;
        assert!(e.check().is_err());
    }
}
