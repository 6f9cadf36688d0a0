use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "smartfilter",
    version,
    about = "Filter multiple-choice benchmarks down to informative examples"
)]
struct Cli {
    /// Worker threads for kNN, density estimation and ablation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Inputs {
    /// Dataset JSONL.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory of prediction JSONL files, one per model and prompt mode.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Model Elo scores (CSV: model,elo).
    #[arg(long)]
    pub elo: Option<PathBuf>,
    /// Run configuration (TOML). Defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct EmbeddingArgs {
    /// Embedding file (binary EMB1 or JSON rows).
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Example ids, one per embedding row.
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that predictions and embeddings cover every example.
    Validate {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        embeddings: EmbeddingArgs,
    },
    /// Run the filter and write the filtered dataset, ledger and report.
    Filter {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        embeddings: EmbeddingArgs,
        /// Execution order of the three filtering steps.
        #[arg(long, default_value = "easy,contamination,similarity")]
        step_order: String,
    },
    /// Rebuild the report from an existing ledger.
    Report {
        #[command(flatten)]
        inputs: Inputs,
        /// Ledger written by `filter`.
        #[arg(long)]
        ledger: PathBuf,
        /// Similarity artifact; defaults to similarity.json beside the ledger.
        #[arg(long)]
        similarity: Option<PathBuf>,
    },
    /// Filtered percentage over random model subsets.
    Ablate {
        #[command(flatten)]
        inputs: Inputs,
        /// Ledger to take prefilter and similarity flags from. Without it the
        /// full filter is run first, which needs the embeddings.
        #[arg(long, required_unless_present = "embeddings")]
        ledger: Option<PathBuf>,
        #[arg(long, requires = "manifest")]
        embeddings: Option<PathBuf>,
        #[arg(long, requires = "embeddings")]
        manifest: Option<PathBuf>,
        /// Subset size; repeatable. Defaults to the configured sizes.
        #[arg(long = "size")]
        sizes: Vec<usize>,
        /// Draws per size; defaults to the configured value.
        #[arg(long)]
        draws: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Validate { inputs, embeddings } => commands::validate(&inputs, &embeddings),
        Command::Filter {
            inputs,
            embeddings,
            step_order,
        } => commands::filter(&inputs, &embeddings, &step_order),
        Command::Report {
            inputs,
            ledger,
            similarity,
        } => commands::report(&inputs, &ledger, similarity.as_deref()),
        Command::Ablate {
            inputs,
            ledger,
            embeddings,
            manifest,
            sizes,
            draws,
        } => {
            let emb = embeddings
                .zip(manifest)
                .map(|(embeddings, manifest)| EmbeddingArgs {
                    embeddings,
                    manifest,
                });
            commands::ablate(&inputs, ledger.as_deref(), emb.as_ref(), &sizes, draws)
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
