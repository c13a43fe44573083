//! Pulse-radar link budget: sensing ranges, backhaul production rate, and
//! per-slot / accumulated echo SNR.

use std::f64::consts::PI;

use crate::beampattern::{beam_gain, SensingBeam};
use crate::scenario::{ScenarioConfig, Vec2, SPEED_OF_LIGHT};
use crate::state::{SensingSchedule, Trajectory};

/// `(R_min, R_max)` in meters for pulse width `t_p` and listening time `t_o`.
pub fn sensing_ranges(t_p: f64, t_o: f64) -> (f64, f64) {
    debug_assert!(t_o > t_p && t_p > 0.0);
    (SPEED_OF_LIGHT * t_p / 2.0, SPEED_OF_LIGHT * t_o / 2.0)
}

/// Backhaul spectral efficiency needed to stream quantized echoes (bits/s/Hz).
pub fn production_rate(
    n_s: f64,
    n_b: f64,
    ranges: (f64, f64),
    delta_r: f64,
    delta_t: f64,
    w_f: f64,
) -> f64 {
    n_s * n_b * (ranges.1 - ranges.0) / (delta_r * delta_t * w_f)
}

/// SNR contributed by one watt of *radiated* average power (`duty * p_rad`)
/// at squared 3-D range `psi_sq` with transmit gain `gain`.
pub fn snr_per_radiated_watt(psi_sq: f64, rcs: f64, gain: f64, cfg: &ScenarioConfig) -> f64 {
    rcs * cfg.beta0_sq() * gain / (16.0 * PI * psi_sq * psi_sq * cfg.sigma2_e)
}

/// Single-slot radar output SNR toward target `e` with peak power `p_rad`,
/// evaluated with the steering vector of the actual geometry.
pub fn per_slot_snr(q: &Vec2, e: usize, p_rad: f64, beam: &SensingBeam, cfg: &ScenarioConfig) -> f64 {
    let d = &cfg.targets[e];
    let gain = beam_gain(&beam.r_d, &cfg.steering(q, d));
    cfg.duty() * p_rad * snr_per_radiated_watt(cfg.dist_sq(q, d), cfg.rcs[e], gain, cfg)
}

/// Same as [`per_slot_snr`] but with the transmit gain taken at the design
/// direction (boresight), which is the form used by the sensing constraint.
pub fn per_slot_snr_design(q: &Vec2, e: usize, p_rad: f64, beam: &SensingBeam, cfg: &ScenarioConfig) -> f64 {
    let d = &cfg.targets[e];
    cfg.duty() * p_rad * snr_per_radiated_watt(cfg.dist_sq(q, d), cfg.rcs[e], beam.design_gain, cfg)
}

/// Accumulated SNR `sum_n alpha[e][n] gamma_e[n]`.
pub fn accumulated_snr(
    schedule: &SensingSchedule,
    traj: &Trajectory,
    p_rad: &[f64],
    beam: &SensingBeam,
    e: usize,
    cfg: &ScenarioConfig,
) -> f64 {
    schedule.alpha[e]
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != 0.0)
        .map(|(n, a)| a * per_slot_snr(&traj.q[n], e, p_rad[n], beam, cfg))
        .sum()
}

/// Accumulated SNR with boresight gain (sensing-constraint form).
pub fn accumulated_snr_design(
    schedule: &SensingSchedule,
    traj: &Trajectory,
    p_rad: &[f64],
    beam: &SensingBeam,
    e: usize,
    cfg: &ScenarioConfig,
) -> f64 {
    schedule.alpha[e]
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != 0.0)
        .map(|(n, a)| a * per_slot_snr_design(&traj.q[n], e, p_rad[n], beam, cfg))
        .sum()
}
