use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use smartfilter_core::metrics::AblationRow;
use smartfilter_core::model::{io, Dataset, EloTable, Ledger, PredictionSet, RunConfig};
use smartfilter_core::pipeline::{self, parse_step_order, run_pipeline, Panel};
use smartfilter_core::report::{
    self, build_report, write_json, write_report, InputPaths, ReportInputs,
};
use smartfilter_core::similarity::SimilarityOutcome;
use smartfilter_core::validate::{validate_alignment, ValidationReport};
use smartfilter_core::Error;

use crate::{EmbeddingArgs, Inputs};

/// 2 for unreadable or malformed input, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if e.is_input_error() { 2 } else { 1 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

struct Loaded {
    dataset: Dataset,
    predictions: Vec<PredictionSet>,
    elo: Option<EloTable>,
    config: RunConfig,
}

fn load(inputs: &Inputs) -> Result<Loaded> {
    let mut config = match &inputs.config {
        Some(path) => io::load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = inputs.seed {
        config.seed = seed;
    }
    config.validate()?;
    let dataset = io::load_dataset(&inputs.dataset)?;
    let predictions = io::load_prediction_dir(&inputs.predictions)?;
    let elo = inputs.elo.as_deref().map(io::load_elo).transpose()?;
    log::info!(
        "loaded {} examples and {} prediction sets",
        dataset.len(),
        predictions.len()
    );
    Ok(Loaded {
        dataset,
        predictions,
        elo,
        config,
    })
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn input_paths(
    inputs: &Inputs,
    embeddings: Option<&EmbeddingArgs>,
    ledger: Option<&Path>,
) -> InputPaths {
    InputPaths {
        dataset: display(&inputs.dataset),
        predictions: display(&inputs.predictions),
        embeddings: embeddings.map(|e| display(&e.embeddings)),
        manifest: embeddings.map(|e| display(&e.manifest)),
        elo: inputs.elo.as_deref().map(display),
        config: inputs.config.as_deref().map(display),
        ledger: ledger.map(display),
    }
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

/// Run metadata that changes between otherwise identical runs; kept out of
/// the report so the report stays byte-for-byte reproducible.
#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    tool_version: &'a str,
    timestamp_unix: u64,
    out: String,
    inputs: InputPaths,
    config: &'a RunConfig,
}

fn write_run_record(
    command: &str,
    out: &Path,
    inputs: InputPaths,
    config: &RunConfig,
) -> Result<()> {
    let record = RunRecord {
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        out: display(out),
        inputs,
        config,
    };
    Ok(write_json(&out.join("run.json"), &record)?)
}

fn print_failures(report: &ValidationReport) {
    const SHOWN: usize = 20;
    for failure in report.failures.iter().take(SHOWN) {
        eprintln!(
            "  {}: {} {:?}",
            failure.set,
            failure.example_id.as_deref().unwrap_or("-"),
            failure.reason
        );
    }
    if report.failures.len() > SHOWN {
        eprintln!("  ... and {} more", report.failures.len() - SHOWN);
    }
}

pub fn validate(inputs: &Inputs, emb: &EmbeddingArgs) -> Result<()> {
    let loaded = load(inputs)?;
    let embeddings = io::load_embeddings(&emb.embeddings, &emb.manifest)?;
    let report = validate_alignment(&loaded.dataset, &loaded.predictions, &embeddings);
    create_out(&inputs.out)?;
    write_json(&inputs.out.join("validation.json"), &report)?;
    println!(
        "{} examples, {} models, {} failures",
        report.examples,
        report.models.len(),
        report.failures.len()
    );
    if !report.passes() {
        print_failures(&report);
        return Err(Error::Validation(report.failures.len()).into());
    }
    Ok(())
}

pub fn filter(inputs: &Inputs, emb: &EmbeddingArgs, step_order: &str) -> Result<()> {
    let order = parse_step_order(step_order)?;
    let loaded = load(inputs)?;
    let embeddings = io::load_embeddings(&emb.embeddings, &emb.manifest)?;
    let validation = validate_alignment(&loaded.dataset, &loaded.predictions, &embeddings);
    if !validation.passes() {
        print_failures(&validation);
        return Err(Error::Validation(validation.failures.len()).into());
    }

    let result = run_pipeline(
        &loaded.dataset,
        &loaded.predictions,
        &embeddings,
        &loaded.config,
        &order,
    )?;
    for warning in &result.warnings {
        log::warn!("{warning}");
    }
    let panel = Panel::new(&loaded.predictions)?;
    let paths = input_paths(inputs, Some(emb), None);
    let report = build_report(ReportInputs {
        dataset: &loaded.dataset,
        ledger: &result.ledger,
        panel: &panel,
        elo: loaded.elo.as_ref(),
        similarity: Some(&result.similarity),
        config: &loaded.config,
        inputs: paths.clone(),
        warnings: result.warnings.clone(),
    })?;

    let out = &inputs.out;
    create_out(out)?;
    let kept = result
        .ledger
        .kept()
        .filter_map(|e| loaded.dataset.get(&e.id));
    io::write_file(&out.join("filtered.jsonl"), |w| io::write_examples(w, kept))?;
    io::write_file(&out.join("ledger.jsonl"), |w| {
        io::write_ledger(w, &result.ledger)
    })?;
    write_json(&out.join("similarity.json"), &result.similarity)?;
    write_report(&report, out)?;
    write_run_record("filter", out, paths, &loaded.config)?;

    let f = &report.filtering;
    println!(
        "{} of {} examples filtered ({:.2}%), {} kept",
        f.filtered, f.examples, f.filtered_pct, f.kept
    );
    Ok(())
}

fn load_similarity(path: &Path) -> Result<SimilarityOutcome> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Parse {
            what: "similarity",
            line: e.line(),
            message: e.to_string(),
        }
        .into()
    })
}

pub fn report(inputs: &Inputs, ledger_path: &Path, similarity: Option<&Path>) -> Result<()> {
    let loaded = load(inputs)?;
    let ledger = io::load_ledger(ledger_path)?;
    let sibling = ledger_path.with_file_name("similarity.json");
    let similarity = match similarity {
        Some(path) => Some(load_similarity(path)?),
        None if sibling.is_file() => Some(load_similarity(&sibling)?),
        None => None,
    };
    let mut warnings = Vec::new();
    if similarity.is_none() {
        warnings.push("no similarity artifact; threshold and histogram omitted".to_string());
    }
    let panel = Panel::new(&loaded.predictions)?;
    let paths = input_paths(inputs, None, Some(ledger_path));
    let report = build_report(ReportInputs {
        dataset: &loaded.dataset,
        ledger: &ledger,
        panel: &panel,
        elo: loaded.elo.as_ref(),
        similarity: similarity.as_ref(),
        config: &loaded.config,
        inputs: paths.clone(),
        warnings,
    })?;
    create_out(&inputs.out)?;
    write_report(&report, &inputs.out)?;
    write_run_record("report", &inputs.out, paths, &loaded.config)?;
    for notice in &report.correlation.notices {
        eprintln!("note: {notice}");
    }
    Ok(())
}

fn base_ledger(
    loaded: &Loaded,
    ledger: Option<&Path>,
    emb: Option<&EmbeddingArgs>,
) -> Result<Ledger> {
    if let Some(path) = ledger {
        return Ok(io::load_ledger(path)?);
    }
    let emb = emb.context("ablation needs either --ledger or --embeddings with --manifest")?;
    let embeddings = io::load_embeddings(&emb.embeddings, &emb.manifest)?;
    let result = run_pipeline(
        &loaded.dataset,
        &loaded.predictions,
        &embeddings,
        &loaded.config,
        &pipeline::SmartStep::DEFAULT_ORDER,
    )?;
    Ok(result.ledger)
}

pub fn ablate(
    inputs: &Inputs,
    ledger: Option<&Path>,
    emb: Option<&EmbeddingArgs>,
    sizes: &[usize],
    draws: Option<usize>,
) -> Result<()> {
    let loaded = load(inputs)?;
    let panel = Panel::new(&loaded.predictions)?;
    let models = panel.models().len();
    if let Some(&n) = sizes.iter().find(|&&n| n == 0 || n > models) {
        return Err(Error::SubsetTooLarge { n, models }.into());
    }
    let base = base_ledger(&loaded, ledger, emb)?;
    let sizes = if sizes.is_empty() {
        loaded.config.ablation_sizes_for(models)
    } else {
        sizes.to_vec()
    };
    let draws = draws.unwrap_or(loaded.config.ablation_draws);
    let table = report::ablation_table(
        &loaded.dataset,
        &panel,
        &base,
        &sizes,
        draws,
        &loaded.config,
    )?;
    let rows: Vec<AblationRow> = table.into_values().collect();

    create_out(&inputs.out)?;
    write_json(&inputs.out.join("ablation.json"), &rows)?;
    println!("models  draws  filtered %");
    for row in &rows {
        println!(
            "{:>6}  {:>5}  {:.1} ± {:.1}",
            row.subset_size,
            row.draws.len(),
            row.mean,
            row.std
        );
    }
    write_run_record(
        "ablate",
        &inputs.out,
        input_paths(inputs, emb, ledger),
        &loaded.config,
    )?;
    Ok(())
}
