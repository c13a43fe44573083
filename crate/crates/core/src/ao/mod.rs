//! Alternating optimization of the resource block (downlink covariances,
//! radar and offloading powers, relaxed sensing schedule) and the trajectory
//! block, each solved as a convex program around the current point.
//!
//! Internally the resource subproblem works in normalized units: downlink
//! covariances are measured in multiples of the power that gives unit SNR
//! at distance `H`, offloading powers in multiples of the power that gives
//! unit SNR to the BS at distance `H_b`. Physical watts are restored when the
//! solution is read back.

mod audit;
mod driver;
mod init;
mod precheck;
mod rank_one;
mod rounding;
mod sp1;
mod sp2;

pub use audit::{audit_solution, audit_with, AuditLine, AuditReport, AUDIT_TOL};
pub use driver::{
    alternate, alternate_from, expansion_at, initial_expansion, tracked_objective, AoAbort, AoRun, AoSettings, IterationRecord, AOTrace, Mode,
};
pub use init::{
    fixed_speed_path, hover_counts, hover_pattern_path, initialize, initialize_path, loiter_path, nearest_neighbor_order, target_waypoints, InitialPoint, Waypoint,
};
pub use precheck::{feasibility_precheck, PrecheckReport, TargetBudget};
pub use rank_one::{extract_rank_one, BeamExtraction, ExtractionPath, RankOne};
pub use rounding::{round_schedule, RepairEntry, RoundingReport};
pub use sp1::{build_sp1, solve_sp1, BeamShape, ScheduleSpec, Sp1Program, Sp1Result, Sp1Setup, Sp1Stage};
pub use sp2::{build_sp2, solve_sp2, PathConstraint, Sp2Program, Sp2Result, Sp2Setup};

use crate::scenario::ScenarioConfig;

/// Relative tightening applied to the right-hand sides of the rate, SNR and
/// power constraints so that interior-point round-off cannot push the
/// recovered point outside the original feasible set.
pub(crate) const FEAS_MARGIN: f64 = 1e-7;

/// Speeds below this (m/s) are treated as hovering.
pub(crate) const HOVER_SPEED: f64 = 1e-6;

/// Schedule entries below this are treated as zero when deciding which
/// trajectory-side constraints to emit.
pub(crate) const ALPHA_EPS: f64 = 1e-9;

/// Relaxed schedule entries within this distance of 0 or 1 are snapped to
/// the bound after the joint resource step; interior-point iterates never
/// reach the bound exactly.
pub(crate) const ALPHA_SNAP: f64 = 1e-5;

/// Unit conversions and big-M constants shared by both subproblems.
#[derive(Debug, Clone, Copy)]
pub struct Scales {
    /// Watts per normalized downlink-power unit, `sigma_k^2 H^2 / beta0^2`.
    pub w: f64,
    /// Watts per normalized offloading-power unit, `sigma_B^2 H_b^2 / (beta0^2 G_T)`.
    pub off: f64,
    /// Big-M bound on the downlink covariances (normalized).
    pub w_cap: f64,
    /// Big-M bound on the offloading power (normalized).
    pub off_cap: f64,
    /// Upper bound on any per-slot downlink rate (nats/s/Hz).
    pub rate_cap: f64,
}

impl Scales {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let h2 = cfg.altitude * cfg.altitude;
        let hb2 = cfg.backhaul_height().powi(2);
        let w = cfg.sigma2_k * h2 / cfg.beta0_sq();
        let off = cfg.sigma2_b * hb2 / (cfg.beta0_sq() * cfg.g_t);

        // farthest horizontal distance to any user / the BS from anywhere
        // the UAV can reasonably be
        let a = cfg.area_size;
        let mut spots = vec![
            crate::scenario::Vec2::new(0.0, 0.0),
            crate::scenario::Vec2::new(a, 0.0),
            crate::scenario::Vec2::new(0.0, a),
            crate::scenario::Vec2::new(a, a),
            cfg.q_start,
            cfg.q_final,
        ];
        spots.extend(cfg.targets.iter().copied());
        spots.extend(cfg.users.iter().copied());
        let far = |p: &crate::scenario::Vec2| spots.iter().map(|s| (s - p).norm_squared()).fold(0.0, f64::max);
        let user_far = cfg.users.iter().map(far).fold(0.0, f64::max);
        let bs_far = far(&cfg.bs_pos);

        // per-slot SINR demand if the whole sensing allowance is taken out of
        // the horizon, and the path-loss spread over the area
        let n = cfg.n_slots as f64;
        let comm_slots = (n - (cfg.e() * cfg.n_s_max) as f64).max(1.0);
        let r_max = cfg.r_min_rate.iter().copied().fold(0.0, f64::max);
        let sinr_need = 2f64.powf(r_max * n / comm_slots) - 1.0;
        let spread = (user_far + h2) / h2;
        let w_cap = (cfg.p_max / w).min(1e2 * spread * (1.0 + sinr_need) * cfg.k().max(1) as f64);

        let off_need = 2f64.powf(cfg.iota * cfg.production_rate()) - 1.0;
        let off_cap = (cfg.p_max / off).min(cfg.solver.big_m_scale * off_need.max(1.0) * (bs_far + hb2) / hb2);

        let rate_cap = (1.0 + cfg.p_max * cfg.n_antennas as f64 / w).ln();
        Scales { w, off, w_cap, off_cap, rate_cap }
    }
}
