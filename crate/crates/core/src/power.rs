//! UAV power terms: rotary-wing aerodynamics, local compute, and the average
//! power objective.
//!
//! Two flight models are available. [`FlightModel::Standard`] is the usual
//! rotary-wing model (blade profile + induced + parasite power) which equals
//! the hover power at zero speed. [`FlightModel::PaperLiteral`] drops the two
//! constant hover baselines, which makes the expression a *delta* over hover
//! and lets it go negative near `v0`; it is kept for comparison runs only.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{ScenarioConfig, Vec2};
use crate::state::{RAState, SensingSchedule, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlightModel {
    Standard,
    PaperLiteral,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AeroParams {
    /// Blade angular velocity (rad/s).
    pub omega: f64,
    pub rotor_radius: f64,
    pub air_density: f64,
    pub solidity: f64,
    pub disc_area: f64,
    /// Blade profile power in hover (W).
    pub p_o: f64,
    /// Induced power in hover (W).
    pub p_i: f64,
    /// Mean rotor induced velocity in hover (m/s).
    pub v0: f64,
    /// Fuselage drag ratio.
    pub drag_ratio: f64,
    pub model_mode: FlightModel,
}

impl AeroParams {
    pub fn table1() -> Self {
        AeroParams {
            omega: 300.0,
            rotor_radius: 0.4,
            air_density: 1.225,
            solidity: 0.05,
            disc_area: 0.503,
            p_o: 80.0,
            p_i: 88.6,
            v0: 4.03,
            drag_ratio: 0.6,
            model_mode: FlightModel::Standard,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega", self.omega),
            ("rotor_radius", self.rotor_radius),
            ("air_density", self.air_density),
            ("solidity", self.solidity),
            ("disc_area", self.disc_area),
            ("v0", self.v0),
            ("drag_ratio", self.drag_ratio),
        ];
        for (name, x) in fields {
            if !(x > 0.0) {
                return Err(Error::Validation(format!("aero.{name} must be > 0")));
            }
        }
        if !(self.p_o >= 0.0 && self.p_i >= 0.0) {
            return Err(Error::Validation("aero.p_o and aero.p_i must be >= 0".into()));
        }
        Ok(())
    }

    /// Coefficient of `|v|^2` in the blade profile term.
    pub fn profile_coeff(&self) -> f64 {
        3.0 * self.p_o / (self.omega * self.omega * self.rotor_radius * self.rotor_radius)
    }

    /// Coefficient of `|v|^3` in the parasite (drag) term.
    pub fn drag_coeff(&self) -> f64 {
        0.5 * self.drag_ratio * self.air_density * self.solidity * self.disc_area
    }
}

pub fn p_hover(params: &AeroParams) -> f64 {
    params.p_o + params.p_i
}

/// Positive root `y` of `1/y^2 = y^2 + |v|^2 / v0^2`.
pub fn y_from_speed(speed: f64, v0: f64) -> f64 {
    let r = speed * speed / (v0 * v0);
    // sqrt(1 + r^2/4) - r/2 written as 1/(sqrt(1 + r^2/4) + r/2) to avoid
    // cancellation at high speed.
    (1.0 / ((1.0 + 0.25 * r * r).sqrt() + 0.5 * r)).sqrt()
}

pub fn y_from_v(v: &Vec2, v0: f64) -> f64 {
    y_from_speed(v.norm(), v0)
}

/// Flight power as a function of speed.
pub fn p_fly_speed(speed: f64, params: &AeroParams) -> f64 {
    let y = y_from_speed(speed, params.v0);
    let profile = params.profile_coeff() * speed * speed;
    let drag = params.drag_coeff() * speed.powi(3);
    match params.model_mode {
        FlightModel::Standard => params.p_o + profile + params.p_i * y + drag,
        FlightModel::PaperLiteral => profile + params.p_i * (y - 1.0) + drag,
    }
}

pub fn p_fly(v: &Vec2, params: &AeroParams) -> f64 {
    p_fly_speed(v.norm(), params)
}

/// Speed minimizing [`p_fly_speed`] on `[0, v_max]` (golden-section search on a
/// grid-bracketed interval).
pub fn min_power_speed(params: &AeroParams, v_max: f64) -> f64 {
    let grid = 2000;
    let mut best = 0.0;
    let mut best_val = p_fly_speed(0.0, params);
    for i in 1..=grid {
        let s = v_max * i as f64 / grid as f64;
        let val = p_fly_speed(s, params);
        if val < best_val {
            best_val = val;
            best = s;
        }
    }
    let step = v_max / grid as f64;
    let (mut a, mut b) = ((best - step).max(0.0), (best + step).min(v_max));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if p_fly_speed(c, params) < p_fly_speed(d, params) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// Power drawn in one slot by the propulsion system given the fraction of
/// the slot spent hovering for sensing.
pub fn p_aero(sense_frac: f64, v: &Vec2, params: &AeroParams) -> f64 {
    sense_frac * p_hover(params) + (1.0 - sense_frac) * p_fly(v, params)
}

pub fn local_power(a_hw: f64, f_loc: f64) -> f64 {
    a_hw * f_loc.powi(3)
}

/// Per-slot breakdown of the average-power objective.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PowerBreakdown {
    pub comm: f64,
    pub radar: f64,
    pub aero: f64,
    pub static_circuit: f64,
    pub local: f64,
    pub offload: f64,
}

impl PowerBreakdown {
    pub fn total(&self) -> f64 {
        self.comm + self.radar + self.aero + self.static_circuit + self.local + self.offload
    }
}

/// Average-power objective in covariance form, split into its terms. The
/// offloading term uses the big-M product variables when they are present
/// so that relaxed schedules are scored consistently with the resource
/// subproblem; at binary schedules both forms coincide.
pub fn objective_breakdown(
    state: &RAState,
    schedule: &SensingSchedule,
    traj: &Trajectory,
    cfg: &ScenarioConfig,
) -> PowerBreakdown {
    let n_slots = cfg.n_slots;
    let duty = cfg.duty();
    let p_loc = cfg.local_power();
    let mut out = PowerBreakdown::default();
    for n in 0..n_slots {
        let frac = schedule.slot_sum(n);
        let comm: f64 = (0..cfg.k()).map(|k| state.w[k][n].trace().re).sum();
        out.comm += cfg.eta * comm;
        out.radar += cfg.eta * duty * state.p_rad[n];
        out.aero += p_aero(frac, &traj.v[n], &cfg.aero);
        out.static_circuit += cfg.n_antennas as f64 * cfg.p_static;
        out.local += frac * p_loc;
        out.offload += (0..cfg.e()).map(|e| state.offload_product(e, n, schedule)).sum::<f64>();
    }
    let inv = 1.0 / n_slots as f64;
    PowerBreakdown {
        comm: out.comm * inv,
        radar: out.radar * inv,
        aero: out.aero * inv,
        static_circuit: out.static_circuit * inv,
        local: out.local * inv,
        offload: out.offload * inv,
    }
}

/// Average UAV power (W).
pub fn objective(
    state: &RAState,
    schedule: &SensingSchedule,
    traj: &Trajectory,
    cfg: &ScenarioConfig,
) -> f64 {
    objective_breakdown(state, schedule, traj, cfg).total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn hover_power_table1() {
        let p = AeroParams::table1();
        assert_eq!(p_hover(&p), 168.6);
        let zero = AeroParams { p_o: 0.0, p_i: 0.0, ..p.clone() };
        assert_eq!(p_hover(&zero), 0.0);
        let only_o = AeroParams { p_o: 100.0, p_i: 0.0, ..p };
        assert_eq!(p_hover(&only_o), 100.0);
    }

    #[test]
    fn flight_power_limits() {
        let mut p = AeroParams::table1();
        assert_relative_eq!(p_fly(&Vec2::zeros(), &p), 168.6, epsilon = 1e-12);
        p.model_mode = FlightModel::PaperLiteral;
        assert!(p_fly(&Vec2::zeros(), &p).abs() < 1e-12);
        // the literal expression dips below zero around v0
        assert!(p_fly_speed(4.03, &p) < 0.0);
    }

    #[test]
    fn flight_power_at_13() {
        let p = AeroParams::table1();
        let v = 13.0f64;
        let profile = 80.0 * (1.0 + 3.0 * v * v / (300.0f64.powi(2) * 0.16));
        let r = v * v / (4.03f64 * 4.03);
        let induced = 88.6 * ((1.0 + r * r / 4.0).sqrt() - r / 2.0).sqrt();
        let drag = 0.5 * 0.6 * 1.225 * 0.05 * 0.503 * v.powi(3);
        let expect = profile + induced + drag;
        assert_relative_eq!(p_fly_speed(13.0, &p), expect, max_relative = 1e-12);
        assert!(expect < 168.6);
        assert!((expect - 130.0).abs() < 15.0, "p_fly(13) = {expect}");
    }

    #[test]
    fn interior_minimizer() {
        let p = AeroParams::table1();
        let vs = min_power_speed(&p, 15.0);
        assert!(vs > 0.0 && vs < 15.0);
        assert!(p_fly_speed(vs, &p) < p_hover(&p));
        for s in [vs - 0.5, vs + 0.5] {
            assert!(p_fly_speed(s, &p) >= p_fly_speed(vs, &p));
        }
    }

    #[test]
    fn y_examples() {
        assert_eq!(y_from_speed(0.0, 4.03), 1.0);
        assert_relative_eq!(y_from_speed(4.03, 4.03), (1.25f64.sqrt() - 0.5).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(y_from_speed(4.03, 4.03), 0.7862, epsilon = 1e-4);
        let y = y_from_speed(40.3, 4.03);
        assert!((y / 0.1 - 1.0).abs() < 0.01);
    }

    #[test]
    fn y_identity_grid() {
        let v0 = 4.03;
        for i in 0..100 {
            let s = 0.3 * i as f64;
            let y = y_from_speed(s, v0);
            let lhs = 1.0 / (y * y);
            let rhs = y * y + s * s / (v0 * v0);
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1.0), "speed {s}");
        }
    }

    #[test]
    fn local_power_examples() {
        assert_relative_eq!(local_power(1e-28, 3e9), 2.7, max_relative = 1e-12);
        assert_eq!(local_power(1e-28, 0.0), 0.0);
        assert_relative_eq!(local_power(1e-28, 6e9) / local_power(1e-28, 3e9), 8.0, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn standard_flight_is_positive(speed in 0.0f64..40.0) {
            prop_assert!(p_fly_speed(speed, &AeroParams::table1()) > 0.0);
        }

        #[test]
        fn y_identity(speed in 0.0f64..100.0) {
            let y = y_from_speed(speed, 4.03);
            let lhs = 1.0 / (y * y);
            let rhs = y * y + speed * speed / (4.03 * 4.03);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1.0));
        }
    }
}
