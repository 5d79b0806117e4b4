//! Command-line pipeline driver: generate synthetic traces, detect homes,
//! and evaluate the results with agreement, validation, and hotspot reports.
//!
//! Every command is deterministic for fixed inputs and flags; `--threads`
//! changes wall time only, never output bytes. Exit codes: 0 success,
//! 1 usage error, 2 data error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Parser)]
#[command(
    name = "hda",
    version,
    about = "Home detection from cell-tower activity traces"
)]
pub struct Cli {
    /// Worker threads for parallel stages (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Directory the command writes its outputs into.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Allow `generate` to write into an existing non-empty directory.
    #[arg(long, global = true)]
    pub force: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic tower network, CDR stream, and ground truth.
    Generate(GenerateArgs),
    /// Aggregate a CDR stream into monthly traces and detect homes.
    Detect(DetectArgs),
    /// Pairwise agreement (SMC) between detection sets.
    Compare(CompareArgs),
    /// Score detections against ground truth or a reference vector.
    Validate(ValidateArgs),
    /// Drop detections whose spatial uncertainty reaches a threshold.
    Filter(FilterArgs),
    /// Classify towers as hot or cold spots over a per-tower value vector.
    Hotspot(HotspotArgs),
    /// Descriptive statistics over traces and detection sets.
    Stats(StatsArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Generator configuration file (`key=value` lines, `#` comments).
    #[arg(long)]
    pub config: PathBuf,

    /// Override the seed from the configuration file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct DetectArgs {
    /// Input CDR CSV (`user_id,timestamp,tower_id,direction,kind,duration_s`).
    #[arg(long)]
    pub cdr: PathBuf,

    /// Tower coordinates CSV (`tower_id,x_m,y_m` or `tower_id,lon,lat`).
    #[arg(long)]
    pub towers: PathBuf,

    /// `all`, or a comma-separated subset of: max_activities,
    /// max_distinct_days, night_window, spatial_perimeter,
    /// night_window_spatial_perimeter.
    #[arg(long, default_value = "all")]
    pub algorithms: String,

    /// Month range `YYYY-MM:YYYY-MM` or a single `YYYY-MM`. Without it the
    /// span is inferred from the data, costing one extra pass over the file.
    #[arg(long)]
    pub months: Option<String>,
}

#[derive(Args)]
pub struct CompareArgs {
    /// Two or more detection CSVs (typically one per algorithm).
    #[arg(long, num_args = 2.., required = true)]
    pub detections: Vec<PathBuf>,
}

#[derive(Args)]
pub struct ValidateArgs {
    /// Detection CSVs to score.
    #[arg(long, num_args = 1.., required = true)]
    pub detections: Vec<PathBuf>,

    /// Ground truth CSV (`user_id,home_tower_id`); also enables accuracy.
    #[arg(long)]
    pub truth: Option<PathBuf>,

    /// Reference population vector CSV (`tower_id,value`) instead of truth.
    #[arg(long)]
    pub reference: Option<PathBuf>,

    /// Tower coordinates CSV.
    #[arg(long)]
    pub towers: PathBuf,
}

#[derive(Args)]
pub struct FilterArgs {
    /// Detection CSV to filter.
    #[arg(long)]
    pub detections: PathBuf,

    /// Keep detections with SU strictly below this many kilometers.
    #[arg(long)]
    pub max_su_km: f64,
}

#[derive(Args)]
pub struct HotspotArgs {
    /// Per-tower value vector CSV (`tower_id,value`, optional `n` column).
    #[arg(long)]
    pub vector: PathBuf,

    /// Tower coordinates CSV.
    #[arg(long)]
    pub towers: PathBuf,

    /// Neighborhood distance band in meters.
    #[arg(long, default_value_t = 10_000.0)]
    pub band_m: f64,

    /// Two-sided confidence level: 0.90, 0.95, or 0.99.
    #[arg(long, default_value_t = 0.90)]
    pub confidence: f64,
}

#[derive(Args)]
pub struct StatsArgs {
    /// CDR CSV; enables the per-user activity-share table.
    #[arg(long)]
    pub cdr: Option<PathBuf>,

    /// Detection CSVs; enable counts, SU summaries, and per-tower SU.
    #[arg(long, num_args = 1..)]
    pub detections: Vec<PathBuf>,

    /// Tower coordinates CSV (required with --cdr or --truth).
    #[arg(long)]
    pub towers: Option<PathBuf>,

    /// Ground truth CSV; with detections, adds the SU-CSM correlation.
    #[arg(long)]
    pub truth: Option<PathBuf>,

    /// Month range for --cdr aggregation (`YYYY-MM:YYYY-MM` or `YYYY-MM`).
    #[arg(long)]
    pub months: Option<String>,

    /// Comma-separated months to leave out of the correlation.
    #[arg(long)]
    pub exclude_months: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; only real mistakes are
            // usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
