//! File-backed run records: the per-iteration trace, the final solution,
//! the audit and a manifest from which the run can be repeated.
//!
//! Layout of a run directory:
//!
//! ```text
//! manifest.toml        mode, seed, config hash, versions, outcome
//! config.toml          the exact scenario (loadable with `load_scenario`)
//! trace.csv            one row per AO iteration
//! audit.txt            pre-check, power breakdown and constraint audit
//! solution/trajectory.csv
//! solution/powers.csv
//! solution/beams.csv
//! solution/scene.csv
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ao::{AoRun, IterationRecord};
use crate::beampattern::{IdealPattern, SensingBeam};
use crate::error::{Error, Result};
use crate::linalg::herm_eig;
use crate::power::p_fly;
use crate::scenario::{scenario_to_toml, ScenarioConfig, Vec2};

/// Conic backend the numbers were produced with.
pub const SOLVER_BACKEND: &str = "clarabel 0.11";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: String,
    pub seed: u64,
    /// SHA-256 of `config.toml`.
    pub config_hash: String,
    /// Config file the run was started from, if any.
    pub source: Option<String>,
    /// `key=value` overrides applied on top of the source (sweeps).
    pub overrides: Vec<String>,
    pub crate_version: String,
    pub solver_backend: String,
    /// `ok`, `infeasible`, `config_error` or `solver_failure`.
    pub status: String,
    pub objective: Option<f64>,
    pub audit_passed: Option<bool>,
    pub iterations: usize,
    pub wall_time: f64,
    pub message: Option<String>,
}

impl Manifest {
    pub fn new(mode: &str, cfg: &ScenarioConfig) -> Self {
        Manifest {
            mode: mode.to_string(),
            seed: cfg.solver.seed,
            config_hash: config_hash(cfg),
            source: None,
            overrides: Vec::new(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            solver_backend: SOLVER_BACKEND.to_string(),
            status: "ok".to_string(),
            objective: None,
            audit_passed: None,
            iterations: 0,
            wall_time: 0.0,
            message: None,
        }
    }
}

/// Hex SHA-256 of the scenario's canonical TOML form.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(scenario_to_toml(cfg).as_bytes()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    })
}

fn num(x: f64) -> String {
    // shortest representation that parses back to the same value
    format!("{x:?}")
}

/// Writes the config and manifest of a run; used on its own when a run
/// stops before producing a solution.
pub fn write_manifest(dir: &Path, cfg: &ScenarioConfig, manifest: &Manifest) -> Result<()> {
    create_dir(dir)?;
    write_text(&dir.join("config.toml"), &scenario_to_toml(cfg))?;
    let text = toml::to_string(manifest).map_err(|e| Error::Parse(e.to_string()))?;
    write_text(&dir.join("manifest.toml"), &text)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.toml");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_trace(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the complete record of a finished run. The manifest's outcome
/// fields are filled in from the run.
pub fn write_run(dir: &Path, run: &AoRun, mut manifest: Manifest) -> Result<()> {
    let cfg = &run.cfg;
    manifest.objective = Some(run.objective);
    manifest.audit_passed = Some(run.audit.passed());
    manifest.iterations = run.trace.records.len();
    manifest.wall_time = run.wall_time;
    manifest.config_hash = config_hash(cfg);
    write_manifest(dir, cfg, &manifest)?;
    write_trace(&dir.join("trace.csv"), &run.trace.records)?;

    let mut audit = String::new();
    audit.push_str(&format!("mode: {}\n", run.mode));
    audit.push_str(&format!("objective: {:.9} W\n", run.objective));
    let b = &run.breakdown;
    audit.push_str(&format!(
        "breakdown (W): comm {:.6}, radar {:.6}, aero {:.6}, static {:.6}, local {:.6}, offload {:.6}\n",
        b.comm, b.radar, b.aero, b.static_circuit, b.local, b.offload
    ));
    audit.push_str(&format!(
        "iterations: {} (converged: {}), worst half-step increase {:.3e}\n",
        run.trace.records.len(),
        run.trace.converged,
        run.trace.worst_uptick()
    ));
    audit.push_str(&format!(
        "rounding: gap before {:.3e}, {} repairs; worst rank gap {:.3e}\n\n",
        run.rounding.gap_before,
        run.rounding.repairs.len(),
        run.beams.worst_gap
    ));
    audit.push_str(&run.precheck.to_string());
    audit.push('\n');
    audit.push_str(&run.audit.to_string());
    audit.push('\n');
    write_text(&dir.join("audit.txt"), &audit)?;

    let sol = dir.join("solution");
    create_dir(&sol)?;
    write_trajectory(&sol.join("trajectory.csv"), run)?;
    write_powers(&sol.join("powers.csv"), run)?;
    write_beams(&sol.join("beams.csv"), run)?;
    write_scene(&sol.join("scene.csv"), cfg)
}

fn write_trajectory(path: &Path, run: &AoRun) -> Result<()> {
    let cfg = &run.cfg;
    let traj = &run.trajectory;
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = ["n", "q_x", "q_y", "v_x", "v_y", "speed", "p_aero"].map(String::from).to_vec();
    header.extend((0..cfg.e()).map(|e| format!("alpha_{e}")));
    w.write_record(&header)?;
    for n in 0..=cfg.n_slots {
        let q = traj.q[n];
        let mut row = vec![n.to_string(), num(q.x), num(q.y)];
        if n < cfg.n_slots {
            let v = traj.v[n];
            row.extend([num(v.x), num(v.y), num(v.norm()), num(p_fly(&v, &cfg.aero))]);
            row.extend((0..cfg.e()).map(|e| num(run.schedule.alpha[e][n])));
        } else {
            // end position only
            row.extend(std::iter::repeat(String::new()).take(4 + cfg.e()));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_powers(path: &Path, run: &AoRun) -> Result<()> {
    let cfg = &run.cfg;
    let st = &run.state;
    let duty = cfg.duty();
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = ["n", "p_comm", "p_rad", "p_rad_avg", "p_off", "p_aero"].map(String::from).to_vec();
    header.extend((0..cfg.k()).map(|k| format!("p_user_{k}")));
    w.write_record(&header)?;
    for n in 0..cfg.n_slots {
        let users: Vec<f64> = (0..cfg.k()).map(|k| st.w[k][n].trace().re).collect();
        let mut row = vec![
            n.to_string(),
            num(users.iter().sum()),
            num(st.p_rad[n]),
            num(duty * st.p_rad[n]),
            num(st.p_off[n]),
            num(p_fly(&run.trajectory.v[n], &cfg.aero)),
        ];
        row.extend(users.iter().map(|p| num(*p)));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Eigen-decomposition of every downlink covariance, one row per
/// (user, slot, eigenpair, antenna), largest eigenvalue first.
fn write_beams(path: &Path, run: &AoRun) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["k", "n", "rank_gap", "extraction", "eig", "eigenvalue", "antenna", "re", "im"])?;
    for (k, row) in run.state.w.iter().enumerate() {
        for (n, cov) in row.iter().enumerate() {
            let (vals, vecs) = herm_eig(cov);
            let gap = run.beams.rank_gaps.get(k).and_then(|r| r.get(n)).copied().unwrap_or(0.0);
            let path = run
                .beams
                .paths
                .get(k)
                .and_then(|r| r.get(n))
                .map(|p| format!("{p:?}").to_lowercase())
                .unwrap_or_default();
            for (j, lambda) in vals.iter().enumerate() {
                for i in 0..cov.nrows() {
                    let z = vecs[j][i];
                    w.write_record([
                        k.to_string(),
                        n.to_string(),
                        num(gap),
                        path.clone(),
                        j.to_string(),
                        num(*lambda),
                        i.to_string(),
                        num(z.re),
                        num(z.im),
                    ])?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Positions of everything a trajectory plot overlays.
fn write_scene(path: &Path, cfg: &ScenarioConfig) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["kind", "index", "x", "y"])?;
    let mut put = |kind: &str, i: usize, p: &Vec2| w.write_record([kind.to_string(), i.to_string(), num(p.x), num(p.y)]);
    for (i, u) in cfg.users.iter().enumerate() {
        put("user", i, u)?;
    }
    for (i, d) in cfg.targets.iter().enumerate() {
        put("target", i, d)?;
    }
    put("bs", 0, &cfg.bs_pos)?;
    put("start", 0, &cfg.q_start)?;
    put("final", 0, &cfg.q_final)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the synthesized beam: covariance entries, fitted scale and error,
/// and the gain sampled over the pattern grid.
pub fn write_beam(dir: &Path, beam: &SensingBeam, pattern: &IdealPattern, cfg: &ScenarioConfig) -> Result<()> {
    create_dir(dir)?;
    let path = dir.join("r_d.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["row", "col", "re", "im"])?;
    for i in 0..beam.r_d.nrows() {
        for j in 0..beam.r_d.ncols() {
            let z = beam.r_d[(i, j)];
            w.write_record([i.to_string(), j.to_string(), num(z.re), num(z.im)])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("beam_summary.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["n_antennas", "rho0", "mse", "design_gain", "trace"])?;
    w.write_record([
        beam.r_d.nrows().to_string(),
        num(beam.rho0),
        num(beam.mse),
        num(beam.design_gain),
        num(beam.r_d.trace().re),
    ])?;
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("gain.csv");
    let gains = beam.gain_profile(pattern, cfg.radar.antenna_spacing, cfg.radar.wavelength);
    let mut w = csv_writer(&path)?;
    w.write_record(["angle_deg", "gain", "ideal"])?;
    for ((t, g), d) in pattern.angles.iter().zip(&gains).zip(&pattern.values) {
        w.write_record([num(t.to_degrees()), num(*g), num(beam.rho0 * d)])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// One row of `solution/trajectory.csv`; velocity fields are absent on the
/// final (position-only) row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub n: usize,
    pub q: Vec2,
    pub v: Option<Vec2>,
    pub p_aero: Option<f64>,
    pub alpha: Vec<f64>,
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
    }
    csv::Reader::from_path(path).map_err(Error::from)
}

fn field(rec: &csv::StringRecord, idx: usize, path: &Path) -> Result<Option<f64>> {
    let s = rec.get(idx).unwrap_or("").trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse(format!("{}: bad number {s:?}", path.display())))
}

/// Reads a trajectory file written by [`write_run`].
pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let mut r = open_csv(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("{}: missing column {name}", path.display())))
    };
    let (cn, cqx, cqy, cvx, cvy, cp) = (col("n")?, col("q_x")?, col("q_y")?, col("v_x")?, col("v_y")?, col("p_aero")?);
    let alpha_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("alpha_"))
        .map(|(i, _)| i)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let n = rec
            .get(cn)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("{}: bad slot index", path.display())))?;
        let need = |i| field(&rec, i, path)?.ok_or_else(|| Error::Parse(format!("{}: missing position", path.display())));
        let q = Vec2::new(need(cqx)?, need(cqy)?);
        let v = match (field(&rec, cvx, path)?, field(&rec, cvy, path)?) {
            (Some(x), Some(y)) => Some(Vec2::new(x, y)),
            _ => None,
        };
        let alpha = alpha_cols
            .iter()
            .map(|i| field(&rec, *i, path).map(|x| x.unwrap_or(0.0)))
            .collect::<Result<_>>()?;
        rows.push(TrajectoryRow { n, q, v, p_aero: field(&rec, cp, path)?, alpha });
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no trajectory rows", path.display())));
    }
    Ok(rows)
}

/// One row of `solution/scene.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRow {
    pub kind: String,
    pub index: usize,
    pub x: f64,
    pub y: f64,
}

pub fn read_scene(path: &Path) -> Result<Vec<SceneRow>> {
    let mut r = open_csv(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Locations of the standard files inside a run directory.
pub fn trajectory_path(run_dir: &Path) -> PathBuf {
    run_dir.join("solution").join("trajectory.csv")
}

pub fn scene_path(run_dir: &Path) -> PathBuf {
    run_dir.join("solution").join("scene.csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ao::{alternate, AoSettings, Mode};
    use crate::beampattern::{ideal_pattern, SensingBeam};
    use crate::scenario::load_scenario;

    fn tiny_run() -> AoRun {
        let cfg = ScenarioConfig::desk_tiny();
        let beam = SensingBeam::isotropic(&cfg);
        alternate(&cfg, &beam, &AoSettings::new(&cfg, Mode::Proposed)).unwrap()
    }

    #[test]
    fn run_directory_round_trip() {
        let run = tiny_run();
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), &run, Manifest::new("proposed", &run.cfg)).unwrap();
        for f in ["manifest.toml", "config.toml", "trace.csv", "audit.txt", "solution/powers.csv", "solution/beams.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let m = read_manifest(dir.path()).unwrap();
        assert_eq!(m.objective, Some(run.objective));
        assert_eq!(m.iterations, run.trace.records.len());
        // the stored config reproduces the hash
        let cfg = load_scenario(dir.path().join("config.toml")).unwrap();
        assert_eq!(config_hash(&cfg), m.config_hash);

        let rows = read_trajectory(&trajectory_path(dir.path())).unwrap();
        assert_eq!(rows.len(), run.cfg.n_slots + 1);
        for (n, r) in rows.iter().enumerate() {
            assert_eq!(r.q, run.trajectory.q[n]);
            if n < run.cfg.n_slots {
                assert_eq!(r.v, Some(run.trajectory.v[n]));
                assert_eq!(r.alpha, vec![run.schedule.alpha[0][n]]);
            } else {
                assert!(r.v.is_none() && r.p_aero.is_none());
            }
        }
        let scene = read_scene(&scene_path(dir.path())).unwrap();
        assert_eq!(scene.iter().filter(|s| s.kind == "user").count(), run.cfg.k());
    }

    #[test]
    fn missing_and_empty_trajectory_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trajectory.csv");
        match read_trajectory(&path) {
            Err(Error::Io { path: p, .. }) => assert!(p.ends_with("trajectory.csv")),
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, "n,q_x,q_y,v_x,v_y,speed,p_aero\n").unwrap();
        assert!(matches!(read_trajectory(&path), Err(Error::Parse(_))));
    }

    #[test]
    fn beam_files() {
        let cfg = ScenarioConfig::desk();
        let beam = SensingBeam::isotropic(&cfg);
        let pattern = ideal_pattern(0.0, cfg.radar.half_beamwidth, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_beam(dir.path(), &beam, &pattern, &cfg).unwrap();
        let text = std::fs::read_to_string(dir.path().join("r_d.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + cfg.n_antennas * cfg.n_antennas);
        let gain = std::fs::read_to_string(dir.path().join("gain.csv")).unwrap();
        assert_eq!(gain.lines().count(), 12);
    }

    #[test]
    fn hash_tracks_config() {
        let a = ScenarioConfig::desk();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.solver.seed += 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
