//! Command-line front end: argument parsing, config loading and the
//! subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod repro;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{parse_config, to_toml, ConfigError, RunConfig};

/// Exit status for a run whose checks all passed.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const SEED_ENV: &str = "COHERENT_SWARM_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "coherent-swarm",
    version,
    about = "Two-node open-loop beamforming simulator"
)]
pub struct Cli {
    /// Run configuration (flat TOML, unit-suffixed keys).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed; falls back to $COHERENT_SWARM_SEED, then a random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for relative output paths.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Reports the resolved seed on stderr
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ranging accuracy bound for the configured waveform and SNR.
    Crlb(CrlbArgs),
    /// Repeated ranging at a fixed separation.
    RangeSim(RangeSimArgs),
    /// Phase transfer through the self-mixing sync chain.
    SyncDemo(SyncDemoArgs),
    /// Coherent-gain probability surface over steering angle and ranging error.
    McGrid(McGridArgs),
    /// Stepped-motion beamforming run.
    Experiment(ExperimentArgs),
    /// Writes the ranging waveform to a file.
    Waveform(WaveformArgs),
    /// Runs every reference check and prints a pass/fail table.
    Repro(ReproArgs),
    /// Prints the effective configuration.
    Config,
}

#[derive(Debug, Args)]
pub struct CrlbArgs {
    #[arg(long)]
    pub snr_db: Option<f64>,
    #[arg(long)]
    pub bw_hz: Option<f64>,
    #[arg(long)]
    pub n_pulses: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Spline,
    Parabolic,
    FftZoom,
}

#[derive(Debug, Args)]
pub struct RangeSimArgs {
    #[arg(long)]
    pub distance_m: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub snr_db: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SyncDemoArgs {
    #[arg(long)]
    pub delta_d_m: Option<f64>,
    #[arg(long)]
    pub fr1_hz: Option<f64>,
    #[arg(long)]
    pub fr2_hz: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McGridArgs {
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Carrier frequency, Hz.
    #[arg(long)]
    pub fc: Option<f64>,
    /// Comma-separated coherent-gain thresholds.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// 5,000 iterations per cell.
    #[arg(long)]
    pub desk: bool,
    #[arg(long)]
    pub error_model: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Carrier frequency, Hz.
    #[arg(long)]
    pub fc: Option<f64>,
    /// Steering angle, degrees.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub snr_db: Option<f64>,
    #[arg(long)]
    pub correction: Option<String>,
    #[arg(long)]
    pub step_m: Option<f64>,
    #[arg(long)]
    pub traverse_m: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WaveFormat {
    Csv,
    Bin,
}

#[derive(Debug, Args)]
pub struct WaveformArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: WaveFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproArgs {
    /// Multiplies every tolerance.
    #[arg(long, default_value_t = 1.0)]
    pub tolerance_scale: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 5000)]
    pub iterations: usize,
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
            } else {
                let _ = out.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match commands::dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
