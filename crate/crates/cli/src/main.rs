//! `uav-isac` command-line front end: beam synthesis, single runs, parameter
//! sweeps, oracle validation and plotting from persisted CSVs.

mod plot;
mod runner;
mod sweep;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use runner::{CliError, ConfigSource};

/// Environment variable naming the root directory for relative `--out`
/// paths and default output locations.
pub const OUT_ROOT_ENV: &str = "UAV_ISAC_OUT_ROOT";

#[derive(Parser, Debug)]
#[command(name = "uav-isac", version, about = "Hovering, resource allocation and trajectory design for UAV sensing and communication")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Proposed,
    Baseline1,
    Baseline2,
    Nosense,
}

impl ModeArg {
    pub fn name(self) -> &'static str {
        match self {
            ModeArg::Proposed => "proposed",
            ModeArg::Baseline1 => "baseline1",
            ModeArg::Baseline2 => "baseline2",
            ModeArg::Nosense => "nosense",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Trajectory,
    Velocity,
    #[value(name = "aero_power", alias = "aero-power")]
    AeroPower,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Oracle,
}

#[derive(clap::Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Scenario TOML file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario used when no config file is given.
    #[arg(long, value_name = "NAME", default_value = "desk")]
    preset: String,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn source(&self) -> ConfigSource {
        match &self.config {
            Some(p) => ConfigSource::File(p.clone()),
            None => ConfigSource::Preset(self.preset.clone()),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize the sensing beam and write its covariance, fit and gain profile.
    SynthBeam {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Run one scheme and write its run record.
    Solve {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value = "proposed")]
        mode: ModeArg,
        /// Cruise speed of baseline 2 (m/s).
        #[arg(long, default_value_t = 13.0)]
        v_fixed: f64,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Run one scheme over a list of parameter values.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// One of SNR_th (dB), M, bs_pos_x, N_b, rcs (m^2), R_min_rate.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(long, value_enum, default_value = "proposed")]
        mode: ModeArg,
        #[arg(long, default_value_t = 13.0)]
        v_fixed: f64,
        /// Concurrent sweep points (defaults to the number of CPUs).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Check closed forms against independent estimators.
    Validate {
        #[arg(long, value_enum, default_value = "oracle")]
        suite: Suite,
        /// Monte-Carlo trials per echo check.
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Render a figure from run or sweep directories (CSV only, nothing is re-run).
    Plot {
        /// Run directories (trajectory, velocity, aero-power) or sweep directories.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long, value_enum)]
        figure: Figure,
        /// Output SVG file (defaults to `<first dir>/plots/<figure>.svg`).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::SynthBeam { config, out } => runner::synth_beam(&config.source(), config.seed, out),
        Command::Solve { config, mode, v_fixed, out } => {
            runner::solve(&config.source(), config.seed, mode, v_fixed, out)
        }
        Command::Sweep { config, param, values, mode, v_fixed, workers, out } => {
            sweep::sweep(&config.source(), config.seed, &param, &values, mode, v_fixed, workers, out)
        }
        Command::Validate { suite: Suite::Oracle, trials, seed, workers, out } => {
            validate::oracle_suite(trials, seed, workers, out)
        }
        Command::Plot { dirs, figure, out } => plot::plot(&dirs, figure, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
