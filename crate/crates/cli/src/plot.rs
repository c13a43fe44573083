//! SVG figures rendered purely from persisted CSVs.

use std::path::{Path, PathBuf};

use plotters::prelude::*;
use uav_isac::power::p_hover;
use uav_isac::record::{read_manifest, read_scene, read_trajectory, scene_path, trajectory_path, TrajectoryRow};
use uav_isac::scenario::load_scenario;

use crate::runner::CliError;
use crate::sweep::read_sweep;
use crate::Figure;

const SIZE: (u32, u32) = (800, 600);

fn draw_err<E: std::fmt::Debug>(e: E) -> CliError {
    CliError::config(format!("drawing failed: {e:?}"))
}

/// Axis range covering `values` with a small margin.
fn span(values: impl IntoIterator<Item = f64>) -> std::ops::Range<f64> {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return 0.0..1.0;
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { lo.abs().max(1.0) * 0.05 };
    (lo - pad)..(hi + pad)
}

fn label_for(dir: &Path) -> String {
    read_manifest(dir)
        .map(|m| m.mode)
        .unwrap_or_else(|_| dir.file_name().map_or("run".into(), |n| n.to_string_lossy().into_owned()))
}

struct Series {
    label: String,
    rows: Vec<TrajectoryRow>,
}

fn load_runs(dirs: &[PathBuf]) -> Result<Vec<Series>, CliError> {
    dirs.iter()
        .map(|d| {
            let rows = read_trajectory(&trajectory_path(d))?;
            Ok(Series { label: label_for(d), rows })
        })
        .collect()
}

pub fn plot(dirs: &[PathBuf], figure: Figure, out: Option<PathBuf>) -> Result<(), CliError> {
    let name = match figure {
        Figure::Trajectory => "trajectory",
        Figure::Velocity => "velocity",
        Figure::AeroPower => "aero_power",
        Figure::Sweep => "sweep",
    };
    let out = out.unwrap_or_else(|| dirs[0].join("plots").join(format!("{name}.svg")));
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::config(format!("{}: {e}", parent.display())))?;
    }
    match figure {
        Figure::Trajectory => trajectory_plot(dirs, &out)?,
        Figure::Velocity => slot_plot(dirs, &out, "speed (m/s)", |r| r.v.map(|v| v.norm()), None)?,
        Figure::AeroPower => {
            let hover = load_scenario(dirs[0].join("config.toml")).ok().map(|c| p_hover(&c.aero));
            slot_plot(dirs, &out, "aerodynamic power (W)", |r| r.p_aero, hover)?
        }
        Figure::Sweep => sweep_plot(dirs, &out)?,
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn trajectory_plot(dirs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let runs = load_runs(dirs)?;
    let scene = read_scene(&scene_path(&dirs[0]))?;
    let xs = runs.iter().flat_map(|s| s.rows.iter().map(|r| r.q.x)).chain(scene.iter().map(|p| p.x));
    let ys = runs.iter().flat_map(|s| s.rows.iter().map(|r| r.q.y)).chain(scene.iter().map(|p| p.y));
    let (xr, yr) = (span(xs.collect::<Vec<_>>()), span(ys.collect::<Vec<_>>()));

    let root = SVGBackend::new(out, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("UAV trajectory", ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(xr, yr)
        .map_err(draw_err)?;
    chart.configure_mesh().x_desc("x (m)").y_desc("y (m)").draw().map_err(draw_err)?;

    for (i, s) in runs.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(s.rows.iter().map(|r| (r.q.x, r.q.y)), color.stroke_width(2)))
            .map_err(draw_err)?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        chart
            .draw_series(s.rows.iter().map(|r| Circle::new((r.q.x, r.q.y), 2, color.filled())))
            .map_err(draw_err)?;
        // sensing (hover) slots
        let hovers: Vec<_> = s.rows.iter().filter(|r| r.alpha.iter().any(|a| *a > 0.5)).collect();
        chart
            .draw_series(hovers.iter().map(|r| Circle::new((r.q.x, r.q.y), 7, color.stroke_width(2))))
            .map_err(draw_err)?;
    }

    let marker = |kind: &'static str| scene.iter().filter(move |p| p.kind == kind).map(|p| (p.x, p.y));
    chart
        .draw_series(marker("user").map(|p| TriangleMarker::new(p, 8, BLUE.filled())))
        .map_err(draw_err)?
        .label("users")
        .legend(|(x, y)| TriangleMarker::new((x + 10, y), 6, BLUE.filled()));
    chart
        .draw_series(marker("target").map(|p| Cross::new(p, 7, RED.stroke_width(2))))
        .map_err(draw_err)?
        .label("targets")
        .legend(|(x, y)| Cross::new((x + 10, y), 5, RED.stroke_width(2)));
    chart
        .draw_series(marker("bs").map(|p| Rectangle::new([p, p], BLACK.stroke_width(8))))
        .map_err(draw_err)?
        .label("base station")
        .legend(|(x, y)| Rectangle::new([(x + 6, y - 4), (x + 14, y + 4)], BLACK.filled()));
    chart
        .draw_series(marker("start").chain(marker("final")).map(|p| Circle::new(p, 4, BLACK.filled())))
        .map_err(draw_err)?;
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(draw_err)?;
    root.present().map_err(draw_err)
}

fn slot_plot(
    dirs: &[PathBuf],
    out: &Path,
    y_desc: &str,
    value: impl Fn(&TrajectoryRow) -> Option<f64>,
    reference: Option<f64>,
) -> Result<(), CliError> {
    let runs = load_runs(dirs)?;
    let points: Vec<Vec<(f64, f64)>> = runs
        .iter()
        .map(|s| s.rows.iter().filter_map(|r| value(r).map(|v| (r.n as f64, v))).collect())
        .collect();
    let n_max = points.iter().flatten().map(|p| p.0).fold(0.0, f64::max);
    let yr = span(points.iter().flatten().map(|p| p.1).chain(reference).chain([0.0]).collect::<Vec<_>>());

    let root = SVGBackend::new(out, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(-0.5..n_max + 0.5, yr)
        .map_err(draw_err)?;
    chart.configure_mesh().x_desc("time slot").y_desc(y_desc).draw().map_err(draw_err)?;
    for (i, (s, pts)) in runs.iter().zip(&points).enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(draw_err)?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.iter().map(|p| Circle::new(*p, 3, color.filled())))
            .map_err(draw_err)?;
    }
    if let Some(h) = reference {
        chart
            .draw_series(LineSeries::new([(-0.5, h), (n_max + 0.5, h)], BLACK.stroke_width(1)))
            .map_err(draw_err)?
            .label("hovering")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLACK));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(draw_err)?;
    root.present().map_err(draw_err)
}

fn sweep_plot(dirs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let sweeps = dirs
        .iter()
        .map(|d| read_sweep(&d.join("sweep.csv")))
        .collect::<Result<Vec<_>, _>>()?;
    if sweeps.iter().all(|s| s.is_empty()) {
        return Err(CliError::config("sweep files contain no rows"));
    }
    let points: Vec<Vec<(f64, f64)>> = sweeps
        .iter()
        .map(|rows| rows.iter().filter(|r| r.status == "ok").filter_map(|r| r.objective.map(|o| (r.value, o))).collect())
        .collect();
    let param = sweeps.iter().flatten().next().map_or("value".to_string(), |r| r.param.clone());
    let xr = span(sweeps.iter().flatten().map(|r| r.value).collect::<Vec<_>>());
    let yr = span(points.iter().flatten().map(|p| p.1).collect::<Vec<_>>());

    let root = SVGBackend::new(out, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(xr, yr)
        .map_err(draw_err)?;
    chart.configure_mesh().x_desc(param).y_desc("average power (W)").draw().map_err(draw_err)?;
    for (i, (rows, pts)) in sweeps.iter().zip(&points).enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let label = rows.first().map_or_else(|| format!("sweep {i}"), |r| r.mode.clone());
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(draw_err)?
            .label(label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.iter().map(|p| Circle::new(*p, 4, color.filled())))
            .map_err(draw_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(draw_err)?;
    root.present().map_err(draw_err)
}

/// Gain-versus-angle figure of a synthesized beam.
pub fn gain_plot(csv_path: &Path, out: &Path) -> Result<(), CliError> {
    let mut r = csv::Reader::from_path(csv_path).map_err(|e| CliError::config(format!("{}: {e}", csv_path.display())))?;
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec.map_err(|e| CliError::config(format!("{}: {e}", csv_path.display())))?);
    }
    let xr = span(rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let yr = span(rows.iter().flat_map(|r| [r.1, r.2]).chain([0.0]).collect::<Vec<_>>());
    let root = SVGBackend::new(out, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("sensing beam", ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(xr, yr)
        .map_err(draw_err)?;
    chart.configure_mesh().x_desc("angle (deg)").y_desc("gain").draw().map_err(draw_err)?;
    chart
        .draw_series(LineSeries::new(rows.iter().map(|r| (r.0, r.1)), BLUE.stroke_width(2)))
        .map_err(draw_err)?
        .label("synthesized")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLUE.stroke_width(2)));
    chart
        .draw_series(LineSeries::new(rows.iter().map(|r| (r.0, r.2)), RED.stroke_width(1)))
        .map_err(draw_err)?
        .label("scaled ideal")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED));
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(draw_err)?;
    root.present().map_err(draw_err)
}
