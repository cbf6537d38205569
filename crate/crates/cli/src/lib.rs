//! Library side of the `chartrel` command line.
//!
//! Exit codes: 0 success, 1 data error, 2 configuration error.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
pub mod formats;

pub use commands::{convert, eval, qa, simulate};

/// Schema version stamped into the QA report.
pub const QA_REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    /// Bad input data: unparseable files, empty datasets.
    Data(anyhow::Error),
    /// Bad flags, config files or output locations.
    Config(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(_) => 1,
            CliError::Config(_) => 2,
        }
    }

    pub(crate) fn data(e: impl Into<anyhow::Error>) -> Self {
        CliError::Data(e.into())
    }

    pub(crate) fn config(e: impl Into<anyhow::Error>) -> Self {
        CliError::Config(e.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Data(e) | CliError::Config(e) => write!(f, "{e:#}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "chartrel", version, about = "Chart table conversion, extraction scoring and chart simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    /// `(row, column, value)` lines
    StrText,
    /// one JSON record per line
    StrJsonl,
    /// linearized CSV table
    Lct,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert tables between LCT and the STR formats.
    ///
    /// Input format follows the extension: .csv/.lct (LCT), .str/.txt (STR
    /// text), .jsonl (STR JSONL).
    Convert {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum)]
        to: Target,
        /// Output directory; defaults to each input's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predicted tables against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Comma-separated tolerance tiers.
        #[arg(long, default_value = "strict,slight,high")]
        tol: String,
        /// matched or paper-literal.
        #[arg(long, default_value = "matched")]
        mode: String,
        /// Comma-separated IoU thresholds for the Precision columns.
        #[arg(long, default_value = "0.5,0.75,0.95,1.0")]
        thresholds: String,
        /// Where to write the JSON report.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Count ground truth without a prediction as IoU 0 instead of skipping it.
        #[arg(long)]
        strict_pairing: bool,
    },
    /// Relaxed accuracy of chart QA answers.
    Qa {
        /// JSONL with question_id, predicted and gold per line.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Relative error allowed for numeric answers.
        #[arg(long, default_value_t = chartrel::qa::DEFAULT_MARGIN)]
        margin: f64,
    },
    /// Generate charts from seed tables with an LLM.
    Simulate {
        /// Directory of seed tables (.csv or .lct).
        #[arg(long)]
        seeds: PathBuf,
        /// Output root.
        #[arg(long)]
        out: PathBuf,
        /// TOML configuration file.
        #[arg(long)]
        config: PathBuf,
    },
}

/// Runs a parsed command, writing human-readable output to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Convert { inputs, to, out } => convert(&inputs, to, out.as_deref()),
        Command::Eval { pred, gt, tol, mode, thresholds, report, strict_pairing } => {
            let opts = commands::EvalOptions::parse(&tol, &mode, &thresholds, strict_pairing)?;
            let outcome = eval(&pred, &gt, &opts)?;
            print!("{}", outcome.table);
            write_report(report.as_deref(), &outcome.report.to_json())
        }
        Command::Qa { pred, report, margin } => {
            let summary = qa(&pred, margin)?;
            println!("accuracy: {:.4} ({}/{})", summary.accuracy, summary.correct, summary.count);
            let json = serde_json::json!({
                "schema_version": QA_REPORT_SCHEMA_VERSION,
                "margin": margin,
                "count": summary.count,
                "correct": summary.correct,
                "accuracy": summary.accuracy,
            });
            write_report(report.as_deref(), &serde_json::to_string_pretty(&json).expect("json"))
        }
        Command::Simulate { seeds, out, config } => simulate(&seeds, &out, &config),
    }
}

fn write_report(path: Option<&Path>, json: &str) -> Result<(), CliError> {
    if let Some(path) = path {
        std::fs::write(path, format!("{json}\n"))
            .map_err(|e| CliError::config(anyhow::anyhow!("cannot write report {}: {e}", path.display())))?;
    }
    Ok(())
}
