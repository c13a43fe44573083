//! Config loading, single runs and the mapping from library errors to exit
//! codes.

use std::path::{Path, PathBuf};

use uav_isac::ao::{alternate, AoAbort, AoRun, AoSettings, Mode};
use uav_isac::baselines::{run_baseline, BaselineSpec};
use uav_isac::beampattern::{ideal_pattern, scenario_beam, SensingBeam};
use uav_isac::record::{write_beam, write_manifest, write_run, write_trace, Manifest};
use uav_isac::scenario::{load_scenario, parse_scenario, ScenarioConfig};
use uav_isac::Error;

use crate::{ModeArg, OUT_ROOT_ENV};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_SOLVER: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }
}

/// Exit code for a library error: configuration and I/O problems, pre-check
/// or path infeasibility, and numerical failures.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::Validation(_) | Error::Io { .. } | Error::Dimension(_) | Error::Csv(_) => EXIT_CONFIG,
        Error::Infeasible(_) | Error::Path(_) => EXIT_INFEASIBLE,
        Error::Solver { .. } | Error::RankDeficient(_) => EXIT_SOLVER,
    }
}

/// Manifest status string for an exit code.
pub fn status_name(code: u8) -> &'static str {
    match code {
        0 => "ok",
        EXIT_CONFIG => "config_error",
        EXIT_INFEASIBLE => "infeasible",
        _ => "solver_failure",
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { code: exit_code(&e), message: e.to_string() }
    }
}

#[derive(Debug, Clone)]
pub enum ConfigSource {
    File(PathBuf),
    Preset(String),
}

impl ConfigSource {
    pub fn describe(&self) -> String {
        match self {
            ConfigSource::File(p) => p.display().to_string(),
            ConfigSource::Preset(name) => format!("preset:{name}"),
        }
    }
}

pub fn load(source: &ConfigSource, seed: Option<u64>) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match source {
        ConfigSource::File(p) => load_scenario(p)?,
        ConfigSource::Preset(name) => parse_scenario(&format!("preset = {name:?}\n"))?,
    };
    if let Some(s) = seed {
        cfg.solver.seed = s;
        cfg.validate()?;
    }
    Ok(cfg)
}

/// `--out` resolved against the output-root environment variable; without
/// `--out`, `<root>/<default_name>` (root defaults to `runs`).
pub fn resolve_out(out: Option<PathBuf>, default_name: &str) -> PathBuf {
    let root = std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from);
    match (out, root) {
        (Some(p), _) if p.is_absolute() => p,
        (Some(p), Some(r)) => r.join(p),
        (Some(p), None) => p,
        (None, Some(r)) => r.join(default_name),
        (None, None) => PathBuf::from("runs").join(default_name),
    }
}

pub fn mode_of(mode: ModeArg, v_fixed: f64) -> Mode {
    match mode {
        ModeArg::Proposed => Mode::Proposed,
        ModeArg::Baseline1 => Mode::Baseline1,
        ModeArg::Baseline2 => Mode::Baseline2 { speed: v_fixed },
        ModeArg::Nosense => Mode::NoSense,
    }
}

/// Runs the selected scheme.
pub fn execute(cfg: &ScenarioConfig, beam: &SensingBeam, mode: ModeArg, v_fixed: f64) -> Result<AoRun, AoAbort> {
    match mode {
        ModeArg::Baseline1 => run_baseline(cfg, beam, &BaselineSpec::heuristic()),
        ModeArg::Baseline2 => run_baseline(cfg, beam, &BaselineSpec::zf(v_fixed)),
        ModeArg::Proposed | ModeArg::Nosense => alternate(cfg, beam, &AoSettings::new(cfg, mode_of(mode, v_fixed))),
    }
}

/// Outcome of one run that has been persisted to `dir`.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub code: u8,
    pub objective: Option<f64>,
    pub audit_passed: Option<bool>,
    pub message: String,
}

/// Synthesizes the beam, runs, and writes the record (or, on failure, the
/// manifest and the partial trace). Never fails for solver reasons; the
/// outcome is in the summary.
pub fn run_to_dir(
    cfg: &ScenarioConfig,
    mode: ModeArg,
    v_fixed: f64,
    dir: &Path,
    source: &ConfigSource,
    overrides: Vec<String>,
) -> Result<RunSummary, CliError> {
    let mut manifest = Manifest::new(mode.name(), cfg);
    manifest.source = Some(source.describe());
    manifest.overrides = overrides;
    let outcome = scenario_beam(cfg).map_err(|error| AoAbort { error, trace: Default::default() });
    let outcome = outcome.and_then(|beam| execute(cfg, &beam, mode, v_fixed));
    match outcome {
        Ok(run) => {
            let passed = run.audit.passed();
            write_run(dir, &run, manifest)?;
            let code = if passed { 0 } else { EXIT_SOLVER };
            let message = if passed {
                format!("objective {:.6} W, audit passed", run.objective)
            } else {
                let failed: Vec<_> = run.audit.failures().iter().map(|l| l.constraint.clone()).collect();
                format!("objective {:.6} W, audit FAILED: {}", run.objective, failed.join(", "))
            };
            Ok(RunSummary { code, objective: Some(run.objective), audit_passed: Some(passed), message })
        }
        Err(abort) => {
            let code = exit_code(&abort.error);
            manifest.status = status_name(code).to_string();
            manifest.iterations = abort.trace.records.len();
            manifest.message = Some(abort.to_string());
            write_manifest(dir, cfg, &manifest)?;
            write_trace(&dir.join("trace.csv"), &abort.trace.records)?;
            Ok(RunSummary { code, objective: None, audit_passed: None, message: abort.to_string() })
        }
    }
}

pub fn solve(
    source: &ConfigSource,
    seed: Option<u64>,
    mode: ModeArg,
    v_fixed: f64,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let cfg = load(source, seed)?;
    let dir = resolve_out(out, &format!("solve-{}", mode.name()));
    let summary = run_to_dir(&cfg, mode, v_fixed, &dir, source, Vec::new())?;
    if summary.code == 0 {
        println!("{}: {}", mode.name(), summary.message);
        if let Ok(text) = std::fs::read_to_string(dir.join("audit.txt")) {
            println!("{text}");
        }
        println!("run record: {}", dir.display());
        Ok(())
    } else {
        if let Ok(text) = std::fs::read_to_string(dir.join("audit.txt")) {
            eprintln!("{text}");
        }
        eprintln!("run record: {}", dir.display());
        Err(CliError { code: summary.code, message: summary.message })
    }
}

pub fn synth_beam(source: &ConfigSource, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = load(source, seed)?;
    let dir = resolve_out(out, "beam");
    let pattern = ideal_pattern(0.0, cfg.radar.half_beamwidth, cfg.radar.grid_size)?;
    let beam = scenario_beam(&cfg)?;
    write_beam(&dir, &beam, &pattern, &cfg)?;
    let mut manifest = Manifest::new("synth-beam", &cfg);
    manifest.source = Some(source.describe());
    write_manifest(&dir, &cfg, &manifest)?;
    crate::plot::gain_plot(&dir.join("gain.csv"), &dir.join("gain.svg"))?;
    println!(
        "M = {}: rho0 {:.6}, mse {:.6e}, boresight gain {:.6}",
        cfg.n_antennas, beam.rho0, beam.mse, beam.design_gain
    );
    println!("beam artifacts: {}", dir.display());
    Ok(())
}
