//! Primal state shared by the two subproblems: trajectory, sensing schedule
//! and resource allocation.

use serde::Serialize;

use crate::linalg::{czero, CMatrix};
use crate::scenario::{ScenarioConfig, Vec2};

/// UAV positions and velocities. `q` has `N + 1` entries with `q[0]` the
/// start and `q[N]` the final position; slot `n` is served from `q[n]` and
/// uses `v[n]` to move to `q[n + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub q: Vec<Vec2>,
    pub v: Vec<Vec2>,
}

impl Trajectory {
    pub fn n_slots(&self) -> usize {
        self.v.len()
    }

    /// Largest hover distance over slots scheduled for sensing (`alpha >= 0.5`).
    pub fn hover_gap(&self, schedule: &SensingSchedule, cfg: &ScenarioConfig) -> f64 {
        let mut gap: f64 = 0.0;
        for (e, row) in schedule.alpha.iter().enumerate() {
            for (n, a) in row.iter().enumerate() {
                if *a >= 0.5 {
                    gap = gap.max((self.q[n] - cfg.targets[e]).norm());
                }
            }
        }
        gap
    }
}

/// Sensing indicators `alpha[e][n]`, relaxed to `[0, 1]` during iterations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensingSchedule {
    pub alpha: Vec<Vec<f64>>,
}

impl SensingSchedule {
    pub fn zeros(e: usize, n: usize) -> Self {
        SensingSchedule { alpha: vec![vec![0.0; n]; e] }
    }

    pub fn n_targets(&self) -> usize {
        self.alpha.len()
    }

    pub fn slot_sum(&self, n: usize) -> f64 {
        self.alpha.iter().map(|row| row[n]).sum()
    }

    pub fn target_sum(&self, e: usize) -> f64 {
        self.alpha[e].iter().sum()
    }

    /// `max |alpha - round(alpha)|`.
    pub fn binary_gap(&self) -> f64 {
        self.alpha
            .iter()
            .flatten()
            .map(|a| (a - a.round()).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_binary(&self) -> bool {
        self.alpha.iter().flatten().all(|a| *a == 0.0 || *a == 1.0)
    }

    /// `sum alpha (1 - alpha)`, the quantity the binary penalty drives to zero.
    pub fn binary_residual(&self) -> f64 {
        self.alpha.iter().flatten().map(|a| a - a * a).sum()
    }
}

/// Resource allocation for every slot. Radar powers are peak transmit
/// powers; the radiated average is `duty * p_rad`.
#[derive(Debug, Clone)]
pub struct RAState {
    /// Downlink covariances `w[k][n]`.
    pub w: Vec<Vec<CMatrix>>,
    /// Big-M products `w_tilde[k][e][n] = alpha[e][n] w[k][n]`.
    pub w_tilde: Vec<Vec<Vec<CMatrix>>>,
    pub p_rad: Vec<f64>,
    pub p_rad_tilde: Vec<Vec<f64>>,
    pub p_off: Vec<f64>,
    pub p_off_tilde: Vec<Vec<f64>>,
    /// SINR lower bounds.
    pub mu: Vec<Vec<f64>>,
    pub mu_ke: Vec<Vec<Vec<f64>>>,
    /// Interference-plus-noise upper bounds (normalized units).
    pub phi: Vec<Vec<f64>>,
}

impl RAState {
    pub fn zeros(cfg: &ScenarioConfig) -> Self {
        let (k, e, n, m) = (cfg.k(), cfg.e(), cfg.n_slots, cfg.n_antennas);
        RAState {
            w: vec![vec![czero(m); n]; k],
            w_tilde: vec![vec![vec![czero(m); n]; e]; k],
            p_rad: vec![0.0; n],
            p_rad_tilde: vec![vec![0.0; n]; e],
            p_off: vec![0.0; n],
            p_off_tilde: vec![vec![0.0; n]; e],
            mu: vec![vec![0.0; n]; k],
            mu_ke: vec![vec![vec![0.0; n]; e]; k],
            phi: vec![vec![0.0; n]; k],
        }
    }

    pub fn offload_product(&self, e: usize, n: usize, _schedule: &SensingSchedule) -> f64 {
        self.p_off_tilde[e][n]
    }

    /// Sets every big-M product to its defining value `alpha * x`.
    pub fn sync_products(&mut self, schedule: &SensingSchedule) {
        for (e, row) in schedule.alpha.iter().enumerate() {
            for (n, a) in row.iter().enumerate() {
                self.p_rad_tilde[e][n] = a * self.p_rad[n];
                self.p_off_tilde[e][n] = a * self.p_off[n];
                for k in 0..self.w.len() {
                    self.w_tilde[k][e][n] = &self.w[k][n] * num_complex::Complex64::new(*a, 0.0);
                }
            }
        }
    }

    /// Largest big-M consistency residual, relative to `p_max`.
    pub fn big_m_residual(&self, schedule: &SensingSchedule, duty: f64, p_max: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (e, row) in schedule.alpha.iter().enumerate() {
            for (n, a) in row.iter().enumerate() {
                worst = worst.max(duty * (self.p_rad_tilde[e][n] - a * self.p_rad[n]).abs());
                worst = worst.max((self.p_off_tilde[e][n] - a * self.p_off[n]).abs());
                for k in 0..self.w.len() {
                    let d = &self.w_tilde[k][e][n] - &self.w[k][n] * num_complex::Complex64::new(*a, 0.0);
                    worst = worst.max(d.iter().map(|z| z.norm()).fold(0.0, f64::max));
                }
            }
        }
        worst / p_max
    }
}
