//! Downlink SINR / rates and the two backhaul links.

use crate::linalg::{quad_form, CMatrix};
use crate::scenario::{ScenarioConfig, Vec2};
use crate::state::{SensingSchedule, Trajectory};

/// Signal and interference-plus-noise powers at user `k`, both divided by
/// `beta0^2 / dist^2` (covariance form with unit-modulus steering vectors).
pub fn sinr_terms(k: usize, w_slot: &[CMatrix], q: &Vec2, cfg: &ScenarioConfig) -> (f64, f64) {
    let a = cfg.steering(q, &cfg.users[k]);
    let mut signal = 0.0;
    let mut interference = cfg.sigma2_k * cfg.dist_sq(q, &cfg.users[k]) / cfg.beta0_sq();
    for (i, w) in w_slot.iter().enumerate() {
        let g = quad_form(w, &a);
        if i == k {
            signal = g;
        } else {
            interference += g;
        }
    }
    (signal, interference)
}

/// SINR of user `k` given all downlink covariances of the slot.
pub fn sinr(k: usize, w_slot: &[CMatrix], q: &Vec2, cfg: &ScenarioConfig) -> f64 {
    let (s, i) = sinr_terms(k, w_slot, q, cfg);
    (s / i).max(0.0)
}

/// UAV-to-BS offloading rate `log2(1 + alpha p_off lambda1^2 / sigma_B^2)`.
pub fn uav_to_bs_rate(alpha: f64, p_off: f64, q: &Vec2, cfg: &ScenarioConfig) -> f64 {
    let g = cfg.backhaul_gain(q);
    (1.0 + alpha * p_off * g * g / cfg.sigma2_b).log2()
}

/// Offloading power needed to carry the compressed echo stream from `q`.
pub fn required_offload_power(q: &Vec2, cfg: &ScenarioConfig) -> f64 {
    let g = cfg.backhaul_gain(q);
    (2f64.powf(cfg.iota * cfg.production_rate()) - 1.0) * cfg.sigma2_b / (g * g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackhaulCheck {
    pub rate: f64,
    pub required: f64,
    pub satisfied: bool,
}

/// BS-to-UAV feed rate against the aggregate user demand of the slot.
pub fn bs_to_uav_rate(sense_frac: f64, q: &Vec2, cfg: &ScenarioConfig) -> BackhaulCheck {
    let g = cfg.backhaul_gain(q);
    let rate = (1.0 + cfg.p_bs * g * g / cfg.sigma2_u).log2();
    let required = cfg.total_min_rate() * (1.0 - sense_frac);
    BackhaulCheck { rate, required, satisfied: rate >= required }
}

/// Average rate of user `k` over the horizon, counting only the
/// communication share `1 - sum_e alpha` of each slot.
pub fn avg_user_rate(
    k: usize,
    schedule: &SensingSchedule,
    w: &[Vec<CMatrix>],
    traj: &Trajectory,
    cfg: &ScenarioConfig,
) -> f64 {
    let n_slots = cfg.n_slots;
    let mut total = 0.0;
    for n in 0..n_slots {
        let share = 1.0 - schedule.slot_sum(n);
        if share <= 0.0 {
            continue;
        }
        let slot: Vec<CMatrix> = w.iter().map(|wk| wk[n].clone()).collect();
        total += share * (1.0 + sinr(k, &slot, &traj.q[n], cfg)).log2();
    }
    total / n_slots as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{czero, outer};
    use crate::scenario::db_to_linear;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn one_user() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::table2();
        cfg.users = vec![Vec2::new(50.0, 80.0)];
        cfg.r_min_rate = vec![1.0];
        cfg
    }

    #[test]
    fn matched_single_user() {
        let cfg = one_user();
        let q = Vec2::new(10.0, 20.0);
        let h = cfg.channel(&q, 0);
        let p = 1e-6;
        let w = outer(&h) * Complex64::new(p / h.norm_squared(), 0.0);
        let s = sinr(0, &[w], &q, &cfg);
        assert_relative_eq!(s, p * h.norm_squared() / cfg.sigma2_k, max_relative = 1e-10);
        assert_eq!(sinr(0, &[czero(cfg.n_antennas)], &q, &cfg), 0.0);
    }

    #[test]
    fn vector_form_matches_covariance_form() {
        let mut cfg = ScenarioConfig::table2();
        cfg.users.truncate(2);
        cfg.r_min_rate.truncate(2);
        let q = Vec2::new(120.0, 40.0);
        let m = cfg.n_antennas;
        let w1 = nalgebra::DVector::from_fn(m, |i, _| Complex64::new(1e-4 * (i as f64 + 1.0), -2e-5 * i as f64));
        let w2 = nalgebra::DVector::from_fn(m, |i, _| Complex64::new(-3e-5 * i as f64, 1e-4));
        let slot = vec![outer(&w1), outer(&w2)];
        for k in 0..2 {
            let h = cfg.channel(&q, k);
            let (wk, wi) = if k == 0 { (&w1, &w2) } else { (&w2, &w1) };
            let sig = h.dotc(wk).norm_sqr();
            let int = h.dotc(wi).norm_sqr();
            let direct = sig / (int + cfg.sigma2_k);
            assert_relative_eq!(sinr(k, &slot, &q, &cfg), direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn offload_rate_examples() {
        let cfg = ScenarioConfig::table2();
        let q = cfg.bs_pos;
        assert_eq!(uav_to_bs_rate(0.0, 5.0, &q, &cfg), 0.0);
        let g = cfg.backhaul_gain(&q);
        let p = 15.0 * cfg.sigma2_b / (g * g);
        assert_relative_eq!(uav_to_bs_rate(1.0, p, &q, &cfg), 4.0, epsilon = 1e-12);
        // iota R_Pr = 2 with R_Pr = 4 -> p_off = 3 sigma^2 / lambda^2
        let mut c2 = cfg.clone();
        c2.radar.n_s_override = None;
        let need = 3.0 * cfg.sigma2_b / (g * g);
        let req = required_offload_power(&q, &c2);
        assert_relative_eq!(req / need, (2f64.powf(0.5 * c2.production_rate()) - 1.0) / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn feed_rate_examples() {
        let cfg = ScenarioConfig::table2();
        let q = cfg.bs_pos;
        let sensing = bs_to_uav_rate(1.0, &q, &cfg);
        assert_eq!(sensing.required, 0.0);
        assert!(sensing.satisfied);
        let comm = bs_to_uav_rate(0.0, &q, &cfg);
        assert_eq!(comm.required, 3.0);

        // place the UAV where p_BS lambda^2 / sigma^2 = 7
        let gain_needed = 7.0 * cfg.sigma2_u / cfg.p_bs;
        let dist_sq = cfg.beta0_sq() * cfg.g_t / gain_needed;
        let hb = cfg.backhaul_height();
        let off = (dist_sq - hb * hb).sqrt();
        let q = cfg.bs_pos + Vec2::new(off, 0.0);
        assert_relative_eq!(bs_to_uav_rate(0.0, &q, &cfg).rate, 3.0, epsilon = 1e-9);
        let _ = db_to_linear(0.0);
    }

    #[test]
    fn avg_rate_examples() {
        let cfg = one_user();
        let n = cfg.n_slots;
        let q = Vec2::new(0.0, 0.0);
        let traj = Trajectory { q: vec![q; n + 1], v: vec![Vec2::zeros(); n] };
        let h = cfg.channel(&q, 0);
        // unit SINR in every slot
        let w = outer(&h) * Complex64::new(cfg.sigma2_k / h.norm_squared().powi(2), 0.0);
        let ws = vec![vec![w; n]];
        let none = SensingSchedule::zeros(1, n);
        assert_relative_eq!(avg_user_rate(0, &none, &ws, &traj, &cfg), 1.0, epsilon = 1e-10);
        let all = SensingSchedule { alpha: vec![vec![1.0; n]] };
        assert_eq!(avg_user_rate(0, &all, &ws, &traj, &cfg), 0.0);
    }

    proptest! {
        #[test]
        fn sinr_scale_invariant(c in 0.1f64..10.0, x in -100.0f64..100.0) {
            let mut cfg = ScenarioConfig::table2();
            cfg.users.truncate(2);
            let q = Vec2::new(x, 0.5 * x);
            let a = cfg.steering(&q, &cfg.users[0]);
            let b = cfg.steering(&q, &cfg.users[1]);
            let slot = vec![outer(&a) * Complex64::new(1e-8, 0.0), outer(&b) * Complex64::new(2e-8, 0.0)];
            let s0 = sinr(0, &slot, &q, &cfg);
            let scaled: Vec<_> = slot.iter().map(|w| w * Complex64::new(c, 0.0)).collect();
            cfg.sigma2_k *= c;
            prop_assert!((sinr(0, &scaled, &q, &cfg) - s0).abs() <= 1e-9 * s0.max(1e-12));
        }

        #[test]
        fn backhaul_decreasing(d1 in 0.0f64..200.0, dd in 0.1f64..100.0) {
            let cfg = ScenarioConfig::table2();
            let q1 = cfg.bs_pos + Vec2::new(d1, 0.0);
            let q2 = cfg.bs_pos + Vec2::new(d1 + dd, 0.0);
            prop_assert!(uav_to_bs_rate(1.0, 1.0, &q2, &cfg) < uav_to_bs_rate(1.0, 1.0, &q1, &cfg));
            prop_assert!(bs_to_uav_rate(0.0, &q2, &cfg).rate < bs_to_uav_rate(0.0, &q1, &cfg).rate);
        }
    }
}
