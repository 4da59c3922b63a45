//! `splithalf` command-line tool.
//!
//! Exit codes: 0 on success, 1 for invalid input or arguments, 2 when the
//! input is valid but the requested quantity is mathematically degenerate.

mod commands;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "splithalf", version, about = "Split-half reliability for binary-scored tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split the items of a test into two sub-tests with balanced score sums.
    Split(SplitCmd),
    /// Reliability of a test from its balanced split, with score histograms.
    Reliability(ReliabilityCmd),
    /// Regression estimates of true scores.
    Truescore(TruescoreCmd),
    /// Weighting and reliability of a battery of tests.
    Battery(BatteryCmd),
    /// Generate a synthetic response matrix.
    Simulate(SimulateCmd),
    /// Time generation, splitting and analysis over a range of sizes.
    Scale(ScaleCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CriterionArg {
    AbsS,
    Product,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    SingleBest,
    AllImproving,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Score matrix: one examinee per row, one 0/1 item per column.
    #[arg(long, short)]
    pub input: PathBuf,
    /// The first line holds item labels.
    #[arg(long)]
    pub header: bool,
    /// Field delimiter, also used for CSV output.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[arg(long, value_enum, default_value_t = CriterionArg::AbsS)]
    pub criterion: CriterionArg,
    #[arg(long, value_enum, default_value_t = PolicyArg::SingleBest)]
    pub policy: PolicyArg,
    /// Iteration cap for refinement (default 10 x number of items).
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitCmd {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReliabilityCmd {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Histogram bin width in score units.
    #[arg(long, default_value_t = 1)]
    pub bin_width: u64,
    /// Also write the histograms as CSV to this file.
    #[arg(long)]
    pub histograms: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReliabilityArg {
    Classical,
    SplitHalf,
}

#[derive(Debug, Args)]
pub struct TruescoreCmd {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Reliability used as the regression slope.
    #[arg(long, value_enum, default_value_t = ReliabilityArg::Classical)]
    pub reliability: ReliabilityArg,
    /// Width of the estimate bins.
    #[arg(long, default_value_t = 1.0)]
    pub bin_width: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightsArg {
    Optimal,
    Nonneg,
    EigenCov,
    EigenCorr,
    Equal,
}

#[derive(Debug, Args)]
pub struct BatteryCmd {
    /// One score matrix per component test, same examinees in the same order.
    #[arg(long, num_args = 1.., conflicts_with = "covariance", required_unless_present = "covariance")]
    pub inputs: Vec<PathBuf>,
    /// Covariance matrix of component test scores, one row per line.
    #[arg(long, requires = "reliabilities")]
    pub covariance: Option<PathBuf>,
    /// Component reliabilities; with `--inputs` these replace the split-half values.
    #[arg(long, value_delimiter = ',')]
    pub reliabilities: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = WeightsArg::Optimal)]
    pub weights: WeightsArg,
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    /// D1, D2, D3 or D4.
    #[arg(long)]
    pub model: splithalf::simulate::ModelKind,
    /// Number of examinees.
    #[arg(long = "N")]
    pub n_examinees: usize,
    /// Number of items.
    #[arg(long = "n")]
    pub n_items: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Matrix CSV; metadata goes to the same path with a `.meta.json` extension.
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

#[derive(Debug, Args)]
pub struct ScaleCmd {
    #[arg(long, default_value = "D3")]
    pub model: splithalf::simulate::ModelKind,
    /// Comma-separated sizes as `NxN_items`, for example `1000x100,1000x200`.
    #[arg(long, value_delimiter = ',', default_value = "1000x100,2000x100,1000x200")]
    pub sizes: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[command(flatten)]
    pub out: OutputArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Split(c) => commands::split(c),
        Command::Reliability(c) => commands::reliability(c),
        Command::Truescore(c) => commands::truescore(c),
        Command::Battery(c) => commands::battery(c),
        Command::Simulate(c) => commands::simulate(c),
        Command::Scale(c) => commands::scale(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
