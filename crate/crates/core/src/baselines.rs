//! The two comparison schemes: a heuristic tour with only the speed profile
//! optimized, and zero-forcing beamforming on a path flown at a fixed speed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::ao::{
    alternate, hover_counts, initialize_path, nearest_neighbor_order, AoAbort, AoRun, AoSettings, InitialPoint, Mode,
    Waypoint,
};
use crate::beampattern::SensingBeam;
use crate::error::{Error, Result};
use crate::scenario::{CVector, ScenarioConfig, Vec2};

/// Gram-matrix conditioning below which the channels count as colinear.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    HeuristicTrajectory,
    ZfFixedVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    /// Cruise speed of the fixed-velocity scheme (m/s).
    pub v_fixed: f64,
}

impl BaselineSpec {
    pub fn heuristic() -> Self {
        BaselineSpec { kind: BaselineKind::HeuristicTrajectory, v_fixed: 0.0 }
    }

    pub fn zf(v_fixed: f64) -> Self {
        BaselineSpec { kind: BaselineKind::ZfFixedVelocity, v_fixed }
    }

    pub fn mode(&self) -> Mode {
        match self.kind {
            BaselineKind::HeuristicTrajectory => Mode::Baseline1,
            BaselineKind::ZfFixedVelocity => Mode::Baseline2 { speed: self.v_fixed },
        }
    }

    pub fn validate(&self, cfg: &ScenarioConfig) -> Result<()> {
        if self.kind == BaselineKind::ZfFixedVelocity && !(self.v_fixed > 0.0 && self.v_fixed <= cfg.v_max) {
            return Err(Error::Validation(format!(
                "baseline speed {} m/s must lie in (0, v_max = {}]",
                self.v_fixed, cfg.v_max
            )));
        }
        Ok(())
    }
}

/// Largest site count searched exhaustively by [`shortest_tour`].
const EXACT_TOUR_SITES: usize = 8;

/// Visiting order of `sites` minimizing the open path length from `start`
/// to `end`: exhaustive for small instances, nearest-neighbour beyond.
pub fn shortest_tour(start: &Vec2, sites: &[Vec2], end: &Vec2) -> Vec<usize> {
    if sites.len() > EXACT_TOUR_SITES {
        return nearest_neighbor_order(start, sites);
    }
    struct Search<'a> {
        sites: &'a [Vec2],
        end: Vec2,
        best: f64,
        best_order: Vec<usize>,
        order: Vec<usize>,
        used: Vec<bool>,
    }
    fn visit(s: &mut Search, here: Vec2, len: f64) {
        if len >= s.best {
            return;
        }
        if s.order.len() == s.sites.len() {
            let total = len + (s.end - here).norm();
            if total < s.best {
                s.best = total;
                s.best_order = s.order.clone();
            }
            return;
        }
        for i in 0..s.sites.len() {
            if !s.used[i] {
                s.used[i] = true;
                s.order.push(i);
                visit(s, s.sites[i], len + (s.sites[i] - here).norm());
                s.order.pop();
                s.used[i] = false;
            }
        }
    }
    let mut s = Search {
        sites,
        end: *end,
        best: f64::INFINITY,
        best_order: Vec::new(),
        order: Vec::new(),
        used: vec![false; sites.len()],
    };
    visit(&mut s, *start, 0.0);
    s.best_order
}

/// Shortest tour start -> every user and target -> final, passing through
/// the users and hovering over the targets.
pub fn heuristic_path(cfg: &ScenarioConfig, beam: &SensingBeam) -> Result<InitialPoint> {
    let hover = hover_counts(cfg, beam);
    let mut sites: Vec<Waypoint> = cfg.users.iter().map(|u| Waypoint { pos: *u, target: None, hover: 0 }).collect();
    sites.extend(
        cfg.targets
            .iter()
            .enumerate()
            .map(|(e, d)| Waypoint { pos: *d, target: Some(e), hover: hover[e] }),
    );
    let pos: Vec<_> = sites.iter().map(|w| w.pos).collect();
    let tour: Vec<Waypoint> = shortest_tour(&cfg.q_start, &pos, &cfg.q_final).into_iter().map(|i| sites[i]).collect();
    initialize_path(cfg, &tour)
}

/// Unit-norm zero-forcing directions: column `k` of `H (H^H H)^{-1}`,
/// normalized, where `H = [h_1 .. h_K]`.
pub fn zf_beamformers(channels: &[CVector]) -> Result<Vec<CVector>> {
    let k = channels.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let m = channels[0].len();
    if channels.iter().any(|h| h.len() != m) {
        return Err(Error::Dimension("channel vectors of unequal length".into()));
    }
    if k > m {
        return Err(Error::RankDeficient(format!("{k} users exceed {m} antennas")));
    }
    let h = DMatrix::from_columns(channels);
    let gram = h.adjoint() * &h;
    let eig = gram.clone().symmetric_eigen();
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
    if !(hi > 0.0) || lo <= RANK_TOL * hi {
        return Err(Error::RankDeficient(format!("channel Gram matrix is singular (eigenvalues {lo:.3e} .. {hi:.3e})")));
    }
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("channel Gram matrix is singular".into()))?;
    let w = h * inv;
    Ok((0..k)
        .map(|i| {
            let c = w.column(i).into_owned();
            let n = c.norm();
            c * Complex64::new(1.0 / n, 0.0)
        })
        .collect())
}

/// Runs one baseline with the same loop, audit and record as the proposed
/// scheme.
pub fn run_baseline(
    cfg: &ScenarioConfig,
    beam: &SensingBeam,
    spec: &BaselineSpec,
) -> std::result::Result<AoRun, AoAbort> {
    if let Err(error) = spec.validate(cfg) {
        return Err(AoAbort { error, trace: Default::default() });
    }
    alternate(cfg, beam, &AoSettings::new(cfg, spec.mode()))
}
