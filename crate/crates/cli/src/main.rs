//! `mplab`: calibrate and check menus, analyze and reproduce datasets,
//! simulate synthetic cohorts and run the session service.
//!
//! Exit codes: 0 success, 1 a check failed (reproduction value out of
//! tolerance, menu outside tolerance), 2 usage or input error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "mplab", version, about = "Multiple price list risk elicitation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a calibrated menu and report its attitude boundaries.
    Calibrate(CalibrateArgs),
    /// Parse menu files and check their boundaries against the cutoffs.
    ValidateMenu(ValidateArgs),
    /// Summary statistics and paired tests for a dataset.
    Analyze(AnalyzeArgs),
    /// Compare a dataset against the reference statistics.
    Reproduce(ReproduceArgs),
    /// Generate a synthetic cohort of expected-utility agents.
    Simulate(SimulateArgs),
    /// Run the HTTP+JSON session service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum KindArg {
    Hl,
    Cvu,
    Bins,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DomainArg {
    Payoff,
    Price,
}

#[derive(Args)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, value_enum, default_value = "payoff")]
    pub domain: DomainArg,
    /// High payoff of the HL risky option and of Bins decision 1.
    #[arg(long, default_value_t = 23.10)]
    pub high_b: f64,
    /// Ten amounts, one per line: CvU certain amounts or Bins low payoffs.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Menu file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Largest accepted distance between a boundary and its cutoff.
    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,
}

#[derive(Args, Clone)]
pub struct DataArgs {
    /// Directory of `session_*.tsv` tables with optional `demographics_*.tsv`.
    #[arg(long, conflicts_with = "jsonl")]
    pub data: Option<PathBuf>,
    /// Canonical JSONL cohort file.
    #[arg(long)]
    pub jsonl: Option<PathBuf>,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct ReproduceArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Authentic task-2 CvU menu file, enabling the conditional checks.
    #[arg(long, requires = "cvu_price")]
    pub cvu_payoff: Option<PathBuf>,
    /// Authentic task-5 CvU menu file.
    #[arg(long, requires = "cvu_payoff")]
    pub cvu_price: Option<PathBuf>,
    /// Directory for `reproduction.txt` and `reproduction.json`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// `fixed:R`, `uniform:LO,HI` or `normal:MEAN,SD`.
    #[arg(long)]
    pub dist: String,
    #[arg(long, default_value_t = 88)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 23.08)]
    pub high_b: f64,
    /// Six menu files for tasks 1..=6 instead of the defaults.
    #[arg(long, num_args = 6)]
    pub menus: Option<Vec<PathBuf>>,
    /// Redraw coefficients closer than this to a cutoff.
    #[arg(long, default_value_t = 0.0)]
    pub min_cutoff_distance: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ServeArgs {
    /// TOML config file; `MPLAB_PORT` and `MPLAB_DATA_DIR` override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate(a) => commands::calibrate(&a),
        Command::ValidateMenu(a) => commands::validate_menu(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Reproduce(a) => commands::reproduce(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Serve(a) => commands::serve(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
