//! End-to-end tests of the `uav-isac` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_uav-isac"));
    c.env_remove("UAV_ISAC_OUT_ROOT").env("RUST_LOG", "error");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn text(out: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

/// Desk runs of two modes, shared by the tests below.
struct DeskRuns {
    _tmp: tempfile::TempDir,
    proposed: PathBuf,
    nosense: PathBuf,
}

fn desk_runs() -> &'static DeskRuns {
    static RUNS: OnceLock<DeskRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let proposed = tmp.path().join("proposed");
        let nosense = tmp.path().join("nosense");
        for (mode, dir) in [("proposed", &proposed), ("nosense", &nosense)] {
            let out = run(bin()
                .args(["solve", "--mode", mode, "--config"])
                .arg(config("desk.toml"))
                .arg("--out")
                .arg(dir));
            assert_eq!(code(&out), 0, "{mode}: {}", text(&out));
        }
        DeskRuns { _tmp: tmp, proposed, nosense }
    })
}

#[test]
fn solve_desk_passes_audit() {
    let runs = desk_runs();
    let audit = fs::read_to_string(runs.proposed.join("audit.txt")).unwrap();
    assert!(audit.contains("overall: feasible"), "{audit}");
    let manifest = fs::read_to_string(runs.proposed.join("manifest.toml")).unwrap();
    assert!(manifest.contains("status = \"ok\"") && manifest.contains("audit_passed = true"));
}

#[test]
fn csv_headers_match_golden_file() {
    let runs = desk_runs();
    let golden = include_str!("golden/headers.txt");
    for line in golden.lines().filter(|l| !l.trim().is_empty()) {
        let (file, header) = line.split_once(": ").unwrap();
        let actual = fs::read_to_string(runs.proposed.join(file)).unwrap();
        assert_eq!(actual.lines().next().unwrap(), header, "{file}");
    }
}

#[test]
fn nosense_has_no_hover_slots() {
    let traj = fs::read_to_string(desk_runs().nosense.join("solution/trajectory.csv")).unwrap();
    let header = traj.lines().next().unwrap();
    assert!(!header.contains("alpha_"), "{header}");
}

#[test]
fn full_scale_table_is_rejected_by_precheck() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(bin().args(["solve", "--config"]).arg(config("table2.toml")).arg("--out").arg(tmp.path()));
    assert_eq!(code(&out), 3, "{}", text(&out));
    assert!(text(&out).contains("pre-check"));
    let manifest = fs::read_to_string(tmp.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("status = \"infeasible\""));
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = run(bin().args(["solve", "--config", "/nonexistent/scenario.toml"]));
    assert_eq!(code(&missing), 2, "{}", text(&missing));

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "preset = \"desk\"\nunknown_key = 1\n").unwrap();
    let out = run(bin().args(["solve", "--config"]).arg(&bad));
    assert_eq!(code(&out), 2, "{}", text(&out));

    let fast = tmp.path().join("fast.toml");
    fs::write(&fast, "preset = \"desk\"\n").unwrap();
    let out = run(bin().args(["solve", "--mode", "baseline2", "--v-fixed", "40", "--config"]).arg(&fast).arg("--out").arg(tmp.path().join("b2")));
    assert_eq!(code(&out), 2, "{}", text(&out));

    let out = run(bin().args(["sweep", "--param", "altitude", "--values", "1,2"]));
    assert_eq!(code(&out), 2, "{}", text(&out));
}

#[test]
fn synth_beam_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run(bin().args(["synth-beam", "--seed", "3", "--config"]).arg(config("desk.toml")).arg("--out").arg(dir));
        assert_eq!(code(&out), 0, "{}", text(&out));
    }
    for f in ["r_d.csv", "beam_summary.csv", "gain.csv", "gain.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let header = |f: &str| fs::read_to_string(a.join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header("r_d.csv"), "row,col,re,im");
    assert_eq!(header("beam_summary.csv"), "n_antennas,rho0,mse,design_gain,trace");
    assert_eq!(header("gain.csv"), "angle_deg,gain,ideal");
}

#[test]
fn synth_beam_single_antenna_is_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("m1.toml");
    fs::write(&cfg, "preset = \"desk\"\nn_antennas = 1\n").unwrap();
    let out = run(bin().args(["synth-beam", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join("beam")));
    assert_eq!(code(&out), 0, "{}", text(&out));
    let r_d = fs::read_to_string(tmp.path().join("beam/r_d.csv")).unwrap();
    assert_eq!(r_d.lines().nth(1).unwrap(), "0,0,1.0,0.0");
}

#[test]
fn plots_from_csv_only() {
    let runs = desk_runs();
    let tmp = tempfile::tempdir().unwrap();
    for fig in ["trajectory", "velocity", "aero_power"] {
        let path = tmp.path().join(format!("{fig}.svg"));
        let out = run(bin().args(["plot", "--figure", fig]).arg(&runs.proposed).arg("--out").arg(&path));
        assert_eq!(code(&out), 0, "{}", text(&out));
        let first = fs::read(&path).unwrap();
        fs::remove_file(&path).unwrap();
        run(bin().args(["plot", "--figure", fig]).arg(&runs.proposed).arg("--out").arg(&path));
        assert_eq!(first, fs::read(&path).unwrap(), "{fig} is not reproducible");
    }
    // two modes overlaid: the legend names both
    let path = tmp.path().join("both.svg");
    let out = run(bin()
        .args(["plot", "--figure", "trajectory"])
        .arg(&runs.proposed)
        .arg(&runs.nosense)
        .arg("--out")
        .arg(&path));
    assert_eq!(code(&out), 0, "{}", text(&out));
    let svg = fs::read_to_string(&path).unwrap();
    assert!(svg.contains("proposed") && svg.contains("nosense"));
}

#[test]
fn plot_errors_name_the_missing_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(bin().args(["plot", "--figure", "trajectory"]).arg(tmp.path()));
    assert_eq!(code(&out), 2);
    assert!(text(&out).contains("trajectory.csv"), "{}", text(&out));

    fs::create_dir_all(tmp.path().join("solution")).unwrap();
    fs::write(tmp.path().join("solution/trajectory.csv"), "").unwrap();
    let out = run(bin().args(["plot", "--figure", "velocity"]).arg(tmp.path()));
    assert_ne!(code(&out), 0);
}

#[test]
fn sweep_writes_aggregate_and_honours_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(bin()
        .env("UAV_ISAC_OUT_ROOT", tmp.path())
        .args(["sweep", "--preset", "desk_tiny", "--param", "R_min_rate", "--values", "0.5,1.0", "--workers", "2", "--out", "rates"]));
    assert_eq!(code(&out), 0, "{}", text(&out));
    let dir = tmp.path().join("rates");
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "{csv}");
    assert!(lines[1].starts_with("0,proposed,R_min_rate,0.5,7,ok,"), "{csv}");
    assert!(lines[2].starts_with("1,proposed,R_min_rate,1.0,8,ok,"), "{csv}");
    // each point is reproducible from its manifest
    let m = fs::read_to_string(dir.join("point-01/manifest.toml")).unwrap();
    assert!(m.contains("seed = 8") && m.contains("R_min_rate=1"), "{m}");

    let fig = tmp.path().join("sweep.svg");
    let out = run(bin().args(["plot", "--figure", "sweep"]).arg(&dir).arg("--out").arg(&fig));
    assert_eq!(code(&out), 0, "{}", text(&out));
}

#[test]
fn sweep_records_failed_points_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    // an unreachable threshold fails the pre-check at the second point only
    let out = run(bin()
        .args(["sweep", "--preset", "desk_tiny", "--param", "SNR_th", "--values", "5,80", "--out"])
        .arg(tmp.path()));
    assert_eq!(code(&out), 0, "{}", text(&out));
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert!(lines[1].contains(",ok,"), "{csv}");
    assert!(lines[2].contains(",infeasible,"), "{csv}");
}
