//! `validate --suite oracle`: independent estimators against the closed
//! forms, written as a CSV report.

use std::path::PathBuf;

use uav_isac::beampattern::{scenario_beam, SensingBeam};
use uav_isac::oracle::{echo_snr_check, enumeration_check, gradient_check, OracleCheck};
use uav_isac::scenario::{ScenarioConfig, Vec2};

use crate::runner::{resolve_out, CliError, EXIT_SOLVER};

pub fn oracle_checks(trials: usize, seed: u64) -> Result<Vec<OracleCheck>, CliError> {
    let mut checks = Vec::new();

    // single hover slot, one antenna: the closed form is exact
    let mut one = ScenarioConfig::desk();
    one.n_antennas = 1;
    let iso = SensingBeam::isotropic(&one);
    checks.push(echo_snr_check(&one, &iso, Vec2::new(5.0, -3.0), 10.0, trials, seed)?);

    // the desk array with its synthesized beam (receive gain reported)
    let desk = ScenarioConfig::desk();
    let beam = scenario_beam(&desk)?;
    checks.push(echo_snr_check(&desk, &beam, Vec2::zeros(), 10.0, trials, seed + 1)?);

    checks.push(gradient_check(&desk, 100, seed + 2));

    let tiny = ScenarioConfig::desk_tiny();
    let tiny_beam = scenario_beam(&tiny)?;
    checks.push(enumeration_check(&tiny, &tiny_beam)?);
    Ok(checks)
}

pub fn oracle_suite(trials: usize, seed: u64, workers: Option<usize>, out: Option<PathBuf>) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config(format!("worker pool: {e}")))?;
    let checks = pool.install(|| oracle_checks(trials, seed))?;

    let dir = resolve_out(out, "validate-oracle");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::config(format!("{}: {e}", dir.display())))?;
    let path = dir.join("oracle_report.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    for c in &checks {
        w.serialize(c).map_err(|e| CliError::config(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;

    for c in &checks {
        let verdict = match (c.informational, c.passed) {
            (true, _) => "INFO",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        println!(
            "{verdict} {:<22} estimate {:.6e} reference {:.6e} rel {:+.3e} (tol {:.0e}) {}",
            c.check, c.estimate, c.reference, c.rel_error, c.tolerance, c.note
        );
    }
    println!("report: {}", path.display());
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError { code: EXIT_SOLVER, message: format!("{failed} oracle checks failed") });
    }
    Ok(())
}
