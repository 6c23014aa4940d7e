//! `stsdep` command line: generate sequences, compute p-value matrices, and
//! analyze item dependence.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "stsdep", version, about = "Randomness battery p-value matrices and item-dependence analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write generated bit sequences to files.
    Gen(GenCmd),
    /// Compute the m x 162 p-value matrix.
    Run(RunCmd),
    /// Histogram of q (or scrambled q) against the independence reference, and I.
    Analyze(AnalyzeCmd),
    /// Greedy item removal trajectory and selected sets.
    Minset(MinsetCmd),
    /// Overlap of two item sets against the hypergeometric baseline.
    Overlap(OverlapCmd),
    /// Standard deviation of q and I for matrices at several sequence lengths.
    Report(ReportCmd),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Mt19937,
    #[value(name = "aes128-ctr")]
    Aes128Ctr,
}

#[derive(Args, Debug, Clone)]
pub struct GeneratorArgs {
    /// Generator algorithm.
    #[arg(long, value_enum, default_value = "mt19937")]
    pub kind: GenKind,
    /// MT19937 seed.
    #[arg(long, default_value_t = 5489)]
    pub seed: u32,
    /// AES-128 key, 32 hex digits.
    #[arg(long)]
    pub key: Option<String>,
    /// Initial AES counter block, 32 hex digits (default all zero).
    #[arg(long)]
    pub counter0: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SeqFormat {
    Bin,
    Txt,
}

#[derive(Args, Debug)]
pub struct GenCmd {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Bits per sequence.
    #[arg(long)]
    pub n: usize,
    /// Number of sequences.
    #[arg(long)]
    pub m: usize,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Per-sequence file format.
    #[arg(long, value_enum, default_value = "bin")]
    pub format: SeqFormat,
    /// Write one packed stream file instead of one file per sequence.
    #[arg(long)]
    pub packed: bool,
}

#[derive(Args, Debug)]
pub struct ParamOverrides {
    #[arg(long)]
    pub block_frequency_m: Option<usize>,
    #[arg(long)]
    pub serial_m: Option<usize>,
    #[arg(long)]
    pub approx_entropy_m: Option<usize>,
    #[arg(long)]
    pub linear_complexity_m: Option<usize>,
    #[arg(long)]
    pub universal_l: Option<usize>,
    #[arg(long)]
    pub universal_q: Option<usize>,
    /// Use the corrected variance in the DFT statistic.
    #[arg(long)]
    pub dft_corrected: bool,
}

#[derive(Args, Debug)]
pub struct RunCmd {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Bits per sequence (inline generation).
    #[arg(long, required_unless_present = "input")]
    pub n: Option<usize>,
    /// Number of sequences (inline generation).
    #[arg(long, required_unless_present = "input")]
    pub m: Option<usize>,
    /// Sequence files to test instead of generating inline.
    #[arg(long, num_args = 1.., conflicts_with_all = ["n", "m"])]
    pub input: Vec<PathBuf>,
    /// Output matrix; `.csv` writes CSV, anything else the binary format.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for row computation.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub params: ParamOverrides,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct AnalyzeCmd {
    /// Matrix file (binary or CSV).
    #[arg(long)]
    pub matrix: PathBuf,
    /// Use the scrambled statistic.
    #[arg(long)]
    pub scramble: bool,
    /// Interior histogram bins.
    #[arg(long, default_value_t = 201)]
    pub bins: usize,
    /// File listing the active item ids (default: every column).
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Histogram output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ReportFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StopKind {
    Full,
    Threshold,
    KMin,
}

#[derive(Args, Debug)]
pub struct MinsetCmd {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    pub stop: StopKind,
    /// Selected set: first point with I <= 1 + delta (also the threshold stop).
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Items left when `--stop k-min` ends the run.
    #[arg(long, required_if_eq("stop", "k-min"))]
    pub k_min: Option<usize>,
    /// Also write the final K survivors.
    #[arg(long, num_args = 0..=1, default_missing_value = "25")]
    pub last: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct OverlapCmd {
    /// First item-id list, one per line.
    pub set_a: PathBuf,
    /// Second item-id list.
    pub set_b: PathBuf,
    /// Take the item universe from this matrix instead of the 162 battery items.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeChoice {
    Plain,
    Scrambled,
    Both,
}

#[derive(Args, Debug)]
pub struct ReportCmd {
    /// `N=PATH` pairs: sequence length and matrix file.
    #[arg(long = "matrix", required = true, num_args = 1..)]
    pub matrices: Vec<String>,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeChoice,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ReportFormat,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result: Result<(), CliError> = match cli.command {
        Command::Gen(c) => commands::gen(&c),
        Command::Run(c) => commands::run(&c),
        Command::Analyze(c) => commands::analyze(&c),
        Command::Minset(c) => commands::minset(&c),
        Command::Overlap(c) => commands::overlap(&c),
        Command::Report(c) => commands::report(&c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stsdep: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
