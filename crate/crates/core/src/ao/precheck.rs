//! Closed-form sensing-energy check run before any optimization.

use std::fmt;

use serde::Serialize;

use crate::beampattern::SensingBeam;
use crate::comms::required_offload_power;
use crate::scenario::ScenarioConfig;
use crate::sensing::snr_per_radiated_watt;

/// Energy budget of one target, in radiated watt-slots.
#[derive(Debug, Clone, Serialize)]
pub struct TargetBudget {
    pub target: usize,
    /// Radiated energy needed at hover with the boresight gain.
    pub required: f64,
    /// Radiated energy available over `N_s_max` hover slots once the
    /// offloading power is paid out of `P_max`.
    pub available: f64,
    /// `required / available`; feasible when `<= 1`.
    pub ratio: f64,
    /// Fewest hover slots that can carry the required energy.
    pub min_slots: usize,
    /// Offloading power needed while hovering above the target (W).
    pub offload_power: f64,
    /// Single-slot peak radar power for the threshold, over `P_max`.
    pub peak_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrecheckReport {
    pub targets: Vec<TargetBudget>,
    pub feasible: bool,
    /// Largest ratio over targets (0 without targets).
    pub binding_ratio: f64,
}

impl PrecheckReport {
    /// Headroom factor `1 / binding_ratio`.
    pub fn margin(&self) -> f64 {
        if self.binding_ratio > 0.0 {
            1.0 / self.binding_ratio
        } else {
            f64::INFINITY
        }
    }
}

impl fmt::Display for PrecheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "sensing pre-check: {} (binding ratio {:.4e})",
            if self.feasible { "feasible" } else { "INFEASIBLE" },
            self.binding_ratio
        )?;
        for t in &self.targets {
            writeln!(
                f,
                "  target {}: required {:.4e} W*slot, available {:.4e} W*slot, ratio {:.4e}, min hover slots {}, peak power / P_max {:.3e}",
                t.target, t.required, t.available, t.ratio, t.min_slots, t.peak_ratio
            )?;
        }
        Ok(())
    }
}

/// Compares, per target, the radiated energy the sensing threshold needs at
/// hover against what `N_s_max` slots can deliver under the power budget.
pub fn feasibility_precheck(cfg: &ScenarioConfig, beam: &SensingBeam) -> PrecheckReport {
    let h2 = cfg.altitude * cfg.altitude;
    let mut targets = Vec::with_capacity(cfg.e());
    for (e, d) in cfg.targets.iter().enumerate() {
        let per_watt = snr_per_radiated_watt(h2, cfg.rcs[e], beam.design_gain, cfg);
        let required = if cfg.snr_th[e] > 0.0 { cfg.snr_th[e] / per_watt } else { 0.0 };
        let offload_power = required_offload_power(d, cfg);
        let per_slot = (cfg.p_max - offload_power).max(0.0);
        let available = cfg.n_s_max as f64 * per_slot;
        let ratio = if required == 0.0 {
            0.0
        } else if available > 0.0 {
            required / available
        } else {
            f64::INFINITY
        };
        let min_slots = if required == 0.0 {
            0
        } else if per_slot > 0.0 {
            (required / per_slot).ceil() as usize
        } else {
            usize::MAX
        };
        let peak_ratio = required / cfg.duty() / cfg.p_max;
        targets.push(TargetBudget { target: e, required, available, ratio, min_slots, offload_power, peak_ratio });
    }
    let binding_ratio = targets.iter().map(|t| t.ratio).fold(0.0, f64::max);
    PrecheckReport { feasible: binding_ratio <= 1.0, binding_ratio, targets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beampattern::scenario_beam;
    use std::f64::consts::PI;

    #[test]
    fn zero_threshold_is_feasible() {
        let mut cfg = ScenarioConfig::desk();
        cfg.snr_th = vec![0.0; cfg.e()];
        let beam = SensingBeam::isotropic(&cfg);
        let r = feasibility_precheck(&cfg, &beam);
        assert!(r.feasible);
        assert_eq!(r.binding_ratio, 0.0);
        assert!(r.targets.iter().all(|t| t.min_slots == 0));
    }

    #[test]
    fn table2_is_infeasible_by_orders_of_magnitude() {
        let cfg = ScenarioConfig::table2();
        let beam = scenario_beam(&cfg).unwrap();
        let r = feasibility_precheck(&cfg, &beam);
        assert!(!r.feasible);
        // independent arithmetic: peak power at hover, duty-scaled, against
        // five slots of P_max
        let h = cfg.altitude;
        let peak = cfg.snr_th[0] * 16.0 * PI * h.powi(4) * cfg.sigma2_e
            / (cfg.rcs[0] * 1e-6 * cfg.n_s() * cfg.radar.t_p / cfg.delta_t * beam.design_gain);
        let radiated = peak * cfg.duty();
        let expect = radiated / (cfg.n_s_max as f64 * (cfg.p_max - r.targets[0].offload_power));
        assert!((r.targets[0].ratio / expect - 1.0).abs() < 1e-9);
        assert!(r.binding_ratio > 1.0, "{}", r.binding_ratio);
        // against P_max on peak power the gap is four orders of magnitude
        assert!((r.targets[0].peak_ratio / (peak / cfg.p_max) - 1.0).abs() < 1e-9);
        assert!(r.targets[0].peak_ratio > 1e4 && r.targets[0].peak_ratio < 1e5);
    }

    #[test]
    fn desk_is_feasible_with_margin() {
        let cfg = ScenarioConfig::desk();
        let beam = scenario_beam(&cfg).unwrap();
        let r = feasibility_precheck(&cfg, &beam);
        assert!(r.feasible, "{r}");
        assert!(r.margin() >= 2.0, "{r}");
    }
}
