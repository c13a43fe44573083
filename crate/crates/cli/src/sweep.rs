//! Parameter sweeps: one run per value in a worker pool, each in its own
//! directory, plus an aggregate CSV written once at the end.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use uav_isac::scenario::SweepParam;

use crate::runner::{load, resolve_out, run_to_dir, status_name, CliError, ConfigSource, EXIT_CONFIG};
use crate::ModeArg;

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub mode: String,
    pub param: String,
    pub value: f64,
    pub seed: u64,
    pub status: String,
    pub objective: Option<f64>,
    pub audit_passed: Option<bool>,
    pub dir: String,
    pub message: String,
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>, CliError> {
    if !path.exists() {
        return Err(CliError::config(format!("missing sweep file {}", path.display())));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let rows: Result<Vec<SweepRow>, _> = r.deserialize().collect();
    rows.map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    source: &ConfigSource,
    seed: Option<u64>,
    param: &str,
    values: &[f64],
    mode: ModeArg,
    v_fixed: f64,
    workers: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let base = load(source, seed)?;
    let param = SweepParam::parse(param)?;
    if values.is_empty() {
        return Err(CliError::config("no sweep values given"));
    }
    // reject bad values before anything runs
    for v in values {
        param.apply(&base, *v)?;
    }
    let dir = resolve_out(out, &format!("sweep-{}-{}", param.key(), mode.name()));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::config(format!("{}: {e}", dir.display())))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config(format!("worker pool: {e}")))?;
    let base_seed = base.solver.seed;
    let rows: Vec<SweepRow> = pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(index, value)| {
                let point_dir = dir.join(format!("point-{index:02}"));
                let seed = base_seed + index as u64;
                let mut row = SweepRow {
                    index,
                    mode: mode.name().to_string(),
                    param: param.key().to_string(),
                    value: *value,
                    seed,
                    status: String::new(),
                    objective: None,
                    audit_passed: None,
                    dir: point_dir.file_name().unwrap().to_string_lossy().into_owned(),
                    message: String::new(),
                };
                let outcome = param.apply(&base, *value).map_err(CliError::from).and_then(|mut cfg| {
                    cfg.solver.seed = seed;
                    let overrides = vec![format!("{}={value}", param.key()), format!("seed={seed}")];
                    run_to_dir(&cfg, mode, v_fixed, &point_dir, source, overrides)
                });
                match outcome {
                    Ok(s) => {
                        row.status = status_name(s.code).to_string();
                        row.objective = s.objective;
                        row.audit_passed = s.audit_passed;
                        row.message = s.message;
                    }
                    Err(e) => {
                        row.status = status_name(e.code).to_string();
                        row.message = e.message;
                    }
                }
                log::info!("sweep point {index} ({} = {value}): {}", param.key(), row.message);
                row
            })
            .collect()
    });

    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    for r in &rows {
        w.serialize(r).map_err(|e| CliError::config(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError { code: EXIT_CONFIG, message: format!("{}: {e}", path.display()) })?;

    println!("{:>10}  {:>14}  status", param.key(), "objective (W)");
    for r in &rows {
        let obj = r.objective.map_or("-".to_string(), |o| format!("{o:.6}"));
        println!("{:>10}  {:>14}  {}", r.value, obj, r.status);
    }
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        eprintln!("{failed} of {} sweep points did not finish cleanly (see sweep.csv)", rows.len());
    }
    println!("sweep record: {}", dir.display());
    Ok(())
}
