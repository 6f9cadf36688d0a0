//! The structured filtering report and its CSV exports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    ablate_model_subsets, accuracy, agreement_matrix, category_report, kendall_tau, pearson,
    AblationRow, AgreementMatrix, CategoryReport, Ranking,
};
use crate::model::{io, Dataset, DropReason, EloTable, Ledger, LedgerEntry, RunConfig};
use crate::pipeline::Panel;
use crate::similarity::{HistogramBin, SimilarityOutcome};

/// Input files as given on the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InputPaths {
    pub dataset: String,
    pub predictions: String,
    pub embeddings: Option<String>,
    pub manifest: Option<String>,
    pub elo: Option<String>,
    pub config: Option<String>,
    pub ledger: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: String,
    /// Examples carrying this step's flag; overlaps counted in every step.
    pub flagged: usize,
    pub flagged_pct: f64,
    /// Dropped examples whose highest-priority reason is this step.
    pub attributed: usize,
    pub attributed_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteringTable {
    pub examples: usize,
    /// easy, contaminated, similar, prefiltering.
    pub steps: Vec<StepRow>,
    pub retained_easy: usize,
    pub filtered: usize,
    pub filtered_pct: f64,
    pub kept: usize,
    /// Attributed counts sum to `filtered`, and `filtered + kept == examples`.
    pub reconciles: bool,
}

fn pct(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

pub fn filtering_table(ledger: &Ledger) -> FilteringTable {
    let n = ledger.len();
    let first_reason = |e: &LedgerEntry| e.drop_reasons.first().copied();
    type Flag = fn(&LedgerEntry) -> bool;
    let steps: [(&str, Flag, &[DropReason]); 4] = [
        ("easy", |e| e.easy, &[DropReason::Easy]),
        (
            "contaminated",
            |e| e.contaminated,
            &[DropReason::Contaminated],
        ),
        ("similar", |e| e.removed_as_similar, &[DropReason::Similar]),
        (
            "prefiltering",
            |e| e.is_prefiltered(),
            &[DropReason::ExactDuplicate, DropReason::Anomalous],
        ),
    ];
    let rows: Vec<StepRow> = steps
        .iter()
        .map(|(name, flag, reasons)| {
            let flagged = ledger.count(flag);
            let attributed =
                ledger.count(|e| first_reason(e).is_some_and(|r| reasons.contains(&r)));
            StepRow {
                step: name.to_string(),
                flagged,
                flagged_pct: pct(flagged, n),
                attributed,
                attributed_pct: pct(attributed, n),
            }
        })
        .collect();
    let filtered = ledger.dropped_count();
    let kept = ledger.kept_count();
    let reconciles =
        rows.iter().map(|r| r.attributed).sum::<usize>() == filtered && filtered + kept == n;
    FilteringTable {
        examples: n,
        retained_easy: ledger.count(|e| e.retained_easy),
        filtered,
        filtered_pct: pct(filtered, n),
        kept,
        reconciles,
        steps: rows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub model: String,
    pub original: f64,
    pub original_rank: usize,
    pub filtered: Option<f64>,
    pub filtered_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearsonSection {
    pub models: Vec<String>,
    pub original: f64,
    pub filtered: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSection {
    /// Between the original and filtered rankings.
    pub kendall_tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pearson: Option<PearsonSection>,
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementSection {
    pub original: AgreementMatrix,
    pub filtered: Option<AgreementMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySummary {
    pub k: usize,
    pub pair_count: usize,
    pub delta: Option<f64>,
    pub bandwidth: Option<f64>,
    pub fallback: bool,
    pub clusters: usize,
    pub clustered_examples: usize,
    pub removed: usize,
    pub histogram: Vec<HistogramBin>,
}

impl SimilaritySummary {
    pub fn from_outcome(outcome: &SimilarityOutcome) -> Self {
        SimilaritySummary {
            k: outcome.k,
            pair_count: outcome.pair_count,
            delta: outcome.delta(),
            bandwidth: outcome.threshold.as_ref().map(|t| t.bandwidth),
            fallback: outcome.threshold.as_ref().is_some_and(|t| t.fallback),
            clusters: outcome.clusters.len(),
            clustered_examples: outcome.clusters.iter().map(|c| c.member_ids.len()).sum(),
            removed: outcome.clusters.iter().map(|c| c.removed_ids.len()).sum(),
            histogram: outcome.histogram.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub tool_version: String,
    pub inputs: InputPaths,
    pub config: RunConfig,
    pub filtering: FilteringTable,
    pub accuracy: Vec<AccuracyRow>,
    pub correlation: CorrelationSection,
    pub agreement: AgreementSection,
    pub ablation: Vec<AblationRow>,
    pub categories: CategoryReport,
    pub similarity: Option<SimilaritySummary>,
    pub wrong_gt_suspects: Vec<String>,
    pub gold_conflicts: Vec<String>,
    pub warnings: Vec<String>,
}

pub struct ReportInputs<'a> {
    pub dataset: &'a Dataset,
    pub ledger: &'a Ledger,
    pub panel: &'a Panel<'a>,
    pub elo: Option<&'a EloTable>,
    pub similarity: Option<&'a SimilarityOutcome>,
    pub config: &'a RunConfig,
    pub inputs: InputPaths,
    pub warnings: Vec<String>,
}

fn ranking_over(panel: &Panel<'_>, dataset: &Dataset, ids: &[&str]) -> Result<Ranking> {
    let accuracies = panel
        .full_prompt
        .iter()
        .map(|set| Ok((set.model.clone(), accuracy(set, dataset, ids)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ranking::from_accuracies(accuracies))
}

fn pearson_section(
    elo: &EloTable,
    original: &Ranking,
    filtered: Option<&Ranking>,
    notices: &mut Vec<String>,
) -> Option<PearsonSection> {
    let (with_elo, missing): (Vec<&str>, Vec<&str>) =
        original.models().partition(|m| elo.get(m).is_some());
    if !missing.is_empty() {
        notices.push(format!(
            "no Elo score for {}; excluded from Pearson",
            missing.join(", ")
        ));
    }
    let scores: Vec<f64> = with_elo
        .iter()
        .map(|m| elo.get(m).expect("partitioned"))
        .collect();
    let accs = |r: &Ranking| -> Vec<f64> {
        with_elo
            .iter()
            .map(|m| r.accuracy_of(m).expect("ranked"))
            .collect()
    };
    let original_r = match pearson(&accs(original), &scores) {
        Ok(r) => r,
        Err(e) => {
            notices.push(format!("Pearson omitted: {e}"));
            return None;
        }
    };
    let filtered_r = filtered.and_then(|f| match pearson(&accs(f), &scores) {
        Ok(r) => Some(r),
        Err(e) => {
            notices.push(format!("filtered Pearson omitted: {e}"));
            None
        }
    });
    Some(PearsonSection {
        models: with_elo.iter().map(|m| m.to_string()).collect(),
        original: original_r,
        filtered: filtered_r,
    })
}

pub fn build_report(inputs: ReportInputs<'_>) -> Result<FilterReport> {
    let ReportInputs {
        dataset,
        ledger,
        panel,
        elo,
        similarity,
        config,
        inputs,
        mut warnings,
    } = inputs;
    if ledger.len() != dataset.len() || ledger.entries.iter().any(|e| !dataset.contains(&e.id)) {
        return Err(Error::Config("ledger does not match the dataset".into()));
    }
    let all_ids: Vec<&str> = dataset.ids().collect();
    let kept_ids: Vec<&str> = ledger.kept().map(|e| e.id.as_str()).collect();

    let original = ranking_over(panel, dataset, &all_ids)?;
    let filtered = if kept_ids.is_empty() {
        warnings.push("every example was filtered; filtered metrics omitted".into());
        None
    } else {
        Some(ranking_over(panel, dataset, &kept_ids)?)
    };

    let accuracy = original
        .entries
        .iter()
        .map(|e| AccuracyRow {
            model: e.model.clone(),
            original: e.accuracy,
            original_rank: e.rank,
            filtered: filtered.as_ref().and_then(|f| f.accuracy_of(&e.model)),
            filtered_rank: filtered.as_ref().and_then(|f| f.rank_of(&e.model)),
        })
        .collect();

    let mut notices = Vec::new();
    let kendall = match &filtered {
        Some(f) => match kendall_tau(&original, f) {
            Ok(t) => Some(t),
            Err(e) => {
                notices.push(format!("Kendall tau omitted: {e}"));
                None
            }
        },
        None => None,
    };
    let pearson = match elo {
        Some(table) => pearson_section(table, &original, filtered.as_ref(), &mut notices),
        None => {
            notices.push("no Elo table supplied; Pearson section omitted".into());
            None
        }
    };

    let agreement = AgreementSection {
        original: agreement_matrix(&panel.full_prompt, dataset, &all_ids)?,
        filtered: if kept_ids.is_empty() {
            None
        } else {
            Some(agreement_matrix(&panel.full_prompt, dataset, &kept_ids)?)
        },
    };

    let ablation = config
        .ablation_sizes_for(panel.models().len())
        .into_iter()
        .map(|n| ablate_model_subsets(dataset, panel, ledger, n, config.ablation_draws, config))
        .collect::<Result<Vec<_>>>()?;

    Ok(FilterReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        inputs,
        config: config.clone(),
        filtering: filtering_table(ledger),
        accuracy,
        correlation: CorrelationSection {
            kendall_tau: kendall,
            pearson,
            notices,
        },
        agreement,
        ablation,
        categories: category_report(ledger),
        similarity: similarity.map(SimilaritySummary::from_outcome),
        wrong_gt_suspects: ledger
            .entries
            .iter()
            .filter(|e| e.wrong_gt_suspect)
            .map(|e| e.id.clone())
            .collect(),
        gold_conflicts: ledger
            .entries
            .iter()
            .filter(|e| e.gold_conflict)
            .map(|e| e.id.clone())
            .collect(),
        warnings,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Config(format!("{}: csv export failed: {other:?}", path.display())),
    }
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let map = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&map)?;
    w.write_record(header).map_err(&map)?;
    for row in rows {
        w.write_record(row).map_err(&map)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn strings<const N: usize>(items: [&str; N]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn matrix_rows(m: &AgreementMatrix) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["model".to_string()];
    header.extend(m.models.iter().cloned());
    let rows = m
        .models
        .iter()
        .zip(&m.values)
        .map(|(model, row)| {
            let mut r = vec![model.clone()];
            r.extend(row.iter().map(|v| format!("{v:.6}")));
            r
        })
        .collect();
    (header, rows)
}

/// Writes one CSV per report table into `dir`.
pub fn write_csv_exports(report: &FilterReport, dir: &Path) -> Result<()> {
    let f = &report.filtering;
    let mut rows: Vec<Vec<String>> = f
        .steps
        .iter()
        .map(|s| {
            vec![
                s.step.clone(),
                s.flagged.to_string(),
                format!("{:.2}", s.flagged_pct),
                s.attributed.to_string(),
                format!("{:.2}", s.attributed_pct),
            ]
        })
        .collect();
    rows.push(vec![
        "total".into(),
        f.filtered.to_string(),
        format!("{:.2}", f.filtered_pct),
        f.filtered.to_string(),
        format!("{:.2}", f.filtered_pct),
    ]);
    rows.push(vec![
        "kept".into(),
        f.kept.to_string(),
        format!("{:.2}", pct(f.kept, f.examples)),
        String::new(),
        String::new(),
    ]);
    write_csv(
        &dir.join("filtering.csv"),
        &strings([
            "step",
            "flagged",
            "flagged_pct",
            "attributed",
            "attributed_pct",
        ]),
        &rows,
    )?;

    let rows: Vec<Vec<String>> = report
        .accuracy
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                format!("{:.6}", r.original),
                r.original_rank.to_string(),
                fmt_opt(r.filtered.map(|a| format!("{a:.6}"))),
                fmt_opt(r.filtered_rank),
            ]
        })
        .collect();
    write_csv(
        &dir.join("accuracy.csv"),
        &strings([
            "model",
            "original_accuracy",
            "original_rank",
            "filtered_accuracy",
            "filtered_rank",
        ]),
        &rows,
    )?;

    let c = &report.correlation;
    let mut rows = vec![vec![
        "kendall_tau".to_string(),
        fmt_opt(c.kendall_tau.map(|t| format!("{t:.6}"))),
    ]];
    if let Some(p) = &c.pearson {
        rows.push(vec![
            "pearson_original".into(),
            format!("{:.6}", p.original),
        ]);
        rows.push(vec![
            "pearson_filtered".into(),
            fmt_opt(p.filtered.map(|r| format!("{r:.6}"))),
        ]);
    }
    write_csv(
        &dir.join("correlation.csv"),
        &strings(["statistic", "value"]),
        &rows,
    )?;

    let (header, rows) = matrix_rows(&report.agreement.original);
    write_csv(&dir.join("agreement_original.csv"), &header, &rows)?;
    if let Some(m) = &report.agreement.filtered {
        let (header, rows) = matrix_rows(m);
        write_csv(&dir.join("agreement_filtered.csv"), &header, &rows)?;
    }

    let rows: Vec<Vec<String>> = report
        .ablation
        .iter()
        .map(|r| {
            vec![
                r.subset_size.to_string(),
                r.draws.len().to_string(),
                format!("{:.4}", r.mean),
                format!("{:.4}", r.std),
            ]
        })
        .collect();
    write_csv(
        &dir.join("ablation.csv"),
        &strings(["models", "draws", "mean_pct", "std_pct"]),
        &rows,
    )?;

    let rows: Vec<Vec<String>> = report
        .categories
        .rows
        .iter()
        .chain(std::iter::once(&report.categories.total))
        .map(|r| {
            vec![
                r.subset.clone(),
                r.original.to_string(),
                r.kept.to_string(),
                format!("{:.2}", r.removed_pct),
            ]
        })
        .collect();
    write_csv(
        &dir.join("categories.csv"),
        &strings(["subset", "original", "kept", "removed_pct"]),
        &rows,
    )?;

    if let Some(s) = &report.similarity {
        let rows: Vec<Vec<String>> = s
            .histogram
            .iter()
            .map(|b| {
                vec![
                    format!("{:.6}", b.lo),
                    format!("{:.6}", b.hi),
                    b.count.to_string(),
                ]
            })
            .collect();
        write_csv(
            &dir.join("similarity_histogram.csv"),
            &strings(["lo", "hi", "count"]),
            &rows,
        )?;
    }
    Ok(())
}

/// Writes `report.json` plus the CSV exports.
pub fn write_report(report: &FilterReport, dir: &Path) -> Result<()> {
    write_json(&dir.join("report.json"), report)?;
    write_csv_exports(report, dir)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    io::write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::from)?;
        std::io::Write::write_all(w, b"\n")
    })
}

/// Ablation rows for explicit sizes, keyed by size.
pub fn ablation_table(
    dataset: &Dataset,
    panel: &Panel<'_>,
    ledger: &Ledger,
    sizes: &[usize],
    draws: usize,
    config: &RunConfig,
) -> Result<BTreeMap<usize, AblationRow>> {
    sizes
        .iter()
        .map(|&n| {
            Ok((
                n,
                ablate_model_subsets(dataset, panel, ledger, n, draws, config)?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, set: impl Fn(&mut LedgerEntry)) -> LedgerEntry {
        let mut e = LedgerEntry::new(id, None);
        set(&mut e);
        e.settle();
        e
    }

    #[test]
    fn filtering_table_counts_flags_and_attribution() {
        let ledger = Ledger {
            entries: vec![
                entry("a", |e| e.anomalous = true),
                entry("b", |e| {
                    e.easy = true;
                    e.contaminated = true;
                }),
                entry("c", |e| {
                    e.easy = true;
                    e.retained_easy = true;
                }),
                entry("d", |e| {
                    e.contaminated = true;
                    e.similar_cluster_id = Some(0);
                    e.removed_as_similar = true;
                }),
                entry("e", |_| {}),
            ],
        };
        let t = filtering_table(&ledger);
        let by: BTreeMap<_, _> = t.steps.iter().map(|s| (s.step.as_str(), s)).collect();
        assert_eq!(by["easy"].flagged, 2);
        assert_eq!(by["easy"].attributed, 1);
        assert_eq!(by["contaminated"].flagged, 2);
        assert_eq!(by["contaminated"].attributed, 1);
        assert_eq!(by["similar"].flagged, 1);
        assert_eq!(by["similar"].attributed, 0);
        assert_eq!(by["prefiltering"].attributed, 1);
        assert_eq!(t.filtered, 3);
        assert_eq!(t.kept, 2);
        assert_eq!(t.retained_easy, 1);
        assert!(t.reconciles);
        assert_eq!(t.filtered_pct, 60.0);
    }
}
