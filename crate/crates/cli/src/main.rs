mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "babble", version, about = "Train relation classifiers from natural-language explanations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Paths given here override the
/// config file and are taken relative to the working directory.
#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Pipeline config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub examples: Option<PathBuf>,
    #[arg(long, global = true)]
    pub explanations: Option<PathBuf>,
    #[arg(long, global = true)]
    pub aliases: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dev: Option<PathBuf>,
    #[arg(long, global = true)]
    pub test: Option<PathBuf>,
    /// Directory for stage artifacts.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub master_seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Exact,
    Gibbs,
}

#[derive(Subcommand)]
pub enum Command {
    /// Parse explanations into candidate LFs.
    Parse {
        /// Print the grammar, one rule per line, and exit.
        #[arg(long)]
        grammar_dump: bool,
        /// Candidate output (default: <out-dir>/candidates.jsonl).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the filter bank over parsed candidates.
    Filter {
        /// Parser output (default: <out-dir>/candidates.jsonl, parsing afresh if absent).
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Print a count table instead of the JSON report.
        #[arg(long)]
        report_table: bool,
    },
    /// Fit the label model and write the label matrix, weights and marginals.
    Aggregate {
        /// Surviving LFs (default: <out-dir>/lfs.jsonl).
        #[arg(long)]
        lfs: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Aggregator stage seed, mixed with the master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
    },
    /// Train the classifier on label-model marginals.
    Train {
        /// Default: <out-dir>/marginals.json.
        #[arg(long)]
        marginals: Option<PathBuf>,
        /// Training stage seed, mixed with the master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a trained classifier on a labeled split.
    Eval {
        /// Default: <out-dir>/model.json.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Labeled examples (default: the configured test split).
        #[arg(long)]
        split: Option<PathBuf>,
        /// With --weights, also score majority vote and the label model.
        #[arg(long, requires = "weights")]
        lfs: Option<PathBuf>,
        #[arg(long, requires = "lfs")]
        weights: Option<PathBuf>,
    },
    /// Run every stage and write all artifacts.
    Run,
    /// Rerun the label model and classifier on growing pool prefixes.
    Scale {
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
    },
    /// Serve the annotation API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Static workbench assets served at /.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
    /// Run one LF on one example and print each node's value.
    Execute {
        /// LF as an s-expression, e.g. `(lf +1 (contains (between arg_x arg_y) "wed"))`.
        #[arg(long)]
        lf: String,
        #[arg(long)]
        example: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli.common, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
