//! Subproblem and driver behaviour on small fixtures with independent
//! reference values.

use nalgebra::DMatrix;
use num_complex::Complex64;

use uav_isac::ao::{
    alternate, expansion_at, hover_pattern_path, initial_expansion, solve_sp1, AoSettings, BeamShape, Mode,
    ScheduleSpec, Sp1Setup, Sp1Stage,
};
use uav_isac::beampattern::{scenario_beam, SensingBeam};
use uav_isac::comms::sinr;
use uav_isac::conic::ConicSettings;
use uav_isac::power::{min_power_speed, p_fly_speed};
use uav_isac::scenario::{ScenarioConfig, Vec2};
use uav_isac::sensing::accumulated_snr_design;
use uav_isac::state::{RAState, SensingSchedule, Trajectory};
use uav_isac::Error;

fn stationary(at: Vec2, n: usize) -> Trajectory {
    Trajectory { q: vec![at; n + 1], v: vec![Vec2::zeros(); n] }
}

/// Minimum total downlink power for per-user SINR targets, via the uplink
/// dual: the fixed point `q_k = gamma_k / h_k^H (s2 I + sum_{j != k} q_j h_j h_j^H)^-1 h_k`
/// has the same total power as the downlink optimum.
fn uplink_dual_power(h: &[DMatrix<Complex64>], gamma: &[f64], s2: f64) -> f64 {
    let m = h[0].nrows();
    let mut q = vec![0.0; h.len()];
    for _ in 0..10_000 {
        let prev = q.clone();
        for k in 0..h.len() {
            let mut cov = DMatrix::<Complex64>::identity(m, m) * Complex64::new(s2, 0.0);
            for (j, hj) in h.iter().enumerate() {
                if j != k {
                    cov += hj * hj.adjoint() * Complex64::new(prev[j], 0.0);
                }
            }
            let inv = cov.try_inverse().expect("covariance is positive definite");
            let g = (h[k].adjoint() * inv * &h[k])[(0, 0)].re;
            q[k] = gamma[k] / g;
        }
        if q.iter().zip(&prev).all(|(a, b)| (a - b).abs() <= 1e-14 * a.abs().max(1e-300)) {
            break;
        }
    }
    q.iter().sum()
}

#[test]
fn pure_communication_resource_step_matches_uplink_duality() {
    let mut cfg = ScenarioConfig::desk();
    cfg.n_antennas = 2;
    cfg.n_slots = 3;
    cfg.targets.clear();
    cfg.rcs.clear();
    cfg.snr_th.clear();
    // one user below the UAV, one at 45 degrees: the array tells them apart
    cfg.users = vec![Vec2::new(33.0, 12.0), Vec2::new(73.0, 12.0)];
    cfg.r_min_rate = vec![1.0, 2.0];
    cfg.validate().unwrap();
    let at = Vec2::new(33.0, 12.0);
    cfg.q_start = at;
    cfg.q_final = at;
    let traj = stationary(at, cfg.n_slots);
    let schedule = SensingSchedule::zeros(0, cfg.n_slots);
    let beam = SensingBeam::isotropic(&cfg);

    let mut expansion = initial_expansion(&cfg, &traj, &schedule, None);
    let mut state = RAState::zeros(&cfg);
    let mut last = f64::INFINITY;
    for it in 1..=60 {
        let setup = Sp1Setup {
            cfg: &cfg,
            beam: &beam,
            traj: &traj,
            expansion: &expansion,
            schedule: ScheduleSpec::Fixed(&schedule),
            stage: Sp1Stage::Polish,
            shape: BeamShape::Covariance,
        };
        state = solve_sp1(&setup, &ConicSettings::default()).unwrap().state;
        let power: f64 = state.w.iter().flatten().map(|w| w.trace().re).sum();
        if (last - power).abs() <= 1e-7 * power {
            break;
        }
        last = power;
        expansion = expansion_at(it, &cfg, &traj, &schedule, &state);
    }

    // identical slots: the optimum splits each rate evenly, so every slot
    // carries the per-slot SINR target 2^R - 1
    let h: Vec<DMatrix<Complex64>> = (0..2).map(|k| DMatrix::from_column_slice(2, 1, cfg.channel(&at, k).as_slice())).collect();
    let gamma: Vec<f64> = cfg.r_min_rate.iter().map(|r| 2f64.powf(*r) - 1.0).collect();
    let reference = uplink_dual_power(&h, &gamma, cfg.sigma2_k) * cfg.n_slots as f64;
    let total: f64 = state.w.iter().flatten().map(|w| w.trace().re).sum();
    assert!((total - reference).abs() <= 1e-3 * reference, "{total:.6e} vs dual {reference:.6e}");
    for k in 0..2 {
        let avg = (0..cfg.n_slots)
            .map(|n| {
                let w_slot: Vec<_> = (0..2).map(|j| state.w[j][n].clone()).collect();
                (1.0 + sinr(k, &w_slot, &at, &cfg)).log2()
            })
            .sum::<f64>()
            / cfg.n_slots as f64;
        assert!(avg >= cfg.r_min_rate[k] * (1.0 - 1e-5), "user {k}: rate {avg}");
    }
}

#[test]
fn single_hover_slot_radar_power_meets_threshold_with_equality() {
    let mut cfg = ScenarioConfig::desk_tiny();
    cfg.users.clear();
    cfg.r_min_rate.clear();
    cfg.validate().unwrap();
    let beam = scenario_beam(&cfg).unwrap();
    let init = hover_pattern_path(&cfg, 0, &[2], None).unwrap();
    let schedule = init.schedule.clone();
    assert_eq!(schedule.alpha[0].iter().filter(|a| **a == 1.0).count(), 1);
    let expansion = initial_expansion(&cfg, &init.trajectory, &schedule, None);
    let setup = Sp1Setup {
        cfg: &cfg,
        beam: &beam,
        traj: &init.trajectory,
        expansion: &expansion,
        schedule: ScheduleSpec::Fixed(&schedule),
        stage: Sp1Stage::Polish,
        shape: BeamShape::Covariance,
    };
    let state = solve_sp1(&setup, &ConicSettings::default()).unwrap().state;
    let snr = accumulated_snr_design(&schedule, &init.trajectory, &state.p_rad, &beam, 0, &cfg);
    let th = cfg.snr_th[0];
    assert!((snr - th).abs() <= 1e-5 * th, "accumulated SNR {snr} vs threshold {th}");
    // radar power only where sensing happens
    for (n, p) in state.p_rad.iter().enumerate() {
        if schedule.alpha[0][n] == 0.0 {
            assert!(*p <= 1e-6 * cfg.p_max, "slot {n}: {p}");
        }
    }
}

/// Communication-only instance whose endpoints are reachable at the
/// power-minimizing speed.
fn cruise_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::desk();
    cfg.n_slots = 5;
    cfg.targets.clear();
    cfg.rcs.clear();
    cfg.snr_th.clear();
    cfg.users = vec![Vec2::new(20.0, 10.0)];
    cfg.r_min_rate = vec![1.0];
    let v_star = min_power_speed(&cfg.aero, cfg.v_max);
    cfg.q_start = Vec2::new(0.0, 10.0);
    cfg.q_final = Vec2::new(0.8 * v_star * cfg.delta_t * cfg.n_slots as f64, 10.0);
    cfg.validate().unwrap();
    cfg
}

#[test]
fn communication_only_run_cruises_near_min_power_speed() {
    let cfg = cruise_config();
    let beam = SensingBeam::isotropic(&cfg);
    let run = alternate(&cfg, &beam, &AoSettings::new(&cfg, Mode::Proposed)).unwrap();
    assert!(run.audit.passed(), "{}", run.audit);
    assert!(run.trace.records.len() <= 5, "{} iterations", run.trace.records.len());

    let v_star = min_power_speed(&cfg.aero, cfg.v_max);
    let mean_speed = run.trajectory.v.iter().map(|v| v.norm()).sum::<f64>() / cfg.n_slots as f64;
    assert!((mean_speed - v_star).abs() <= 0.5, "mean speed {mean_speed:.3} vs {v_star:.3}");

    // single-user closed form: matched-filter power for the per-slot SINR
    // target plus flight at the optimal speed plus circuitry
    let gamma = 2f64.powf(cfg.r_min_rate[0]) - 1.0;
    let comm: f64 = (0..cfg.n_slots)
        .map(|n| cfg.eta * gamma * cfg.sigma2_k / cfg.channel(&run.trajectory.q[n], 0).norm_squared())
        .sum::<f64>()
        / cfg.n_slots as f64;
    let closed = comm + p_fly_speed(v_star, &cfg.aero) + cfg.n_antennas as f64 * cfg.p_static;
    assert!((run.objective - closed).abs() <= 0.01 * closed, "{} vs {closed}", run.objective);
}

#[test]
fn loose_tolerance_stops_after_one_iteration() {
    let mut cfg = ScenarioConfig::desk_tiny();
    cfg.solver.eps_ao = 1.0;
    let beam = scenario_beam(&cfg).unwrap();
    let run = alternate(&cfg, &beam, &AoSettings::new(&cfg, Mode::Proposed)).unwrap();
    assert_eq!(run.trace.records.len(), 1);
    assert!(run.audit.passed(), "{}", run.audit);
}

#[test]
fn unreachable_endpoint_is_a_path_error() {
    let mut cfg = ScenarioConfig::desk_tiny();
    cfg.v_max = 1e-3;
    let beam = scenario_beam(&cfg).unwrap();
    let err = alternate(&cfg, &beam, &AoSettings::new(&cfg, Mode::Proposed)).unwrap_err();
    assert!(matches!(err.error, Error::Path(_)), "{}", err);
    assert!(err.trace.records.is_empty());
}

#[test]
fn desk_run_is_consistent() {
    let cfg = ScenarioConfig::desk();
    let beam = scenario_beam(&cfg).unwrap();
    let run = alternate(&cfg, &beam, &AoSettings::new(&cfg, Mode::Proposed)).unwrap();
    assert!(run.audit.passed(), "{}", run.audit);
    assert!(run.schedule.is_binary());
    let residual = run.state.big_m_residual(&run.schedule, cfg.duty(), cfg.p_max);
    assert!(residual <= 1e-6 * cfg.p_max, "big-M residual {residual}");
    assert!(run.trace.worst_uptick() <= 1e-6);
    for e in 0..cfg.e() {
        let slots = run.schedule.target_sum(e);
        assert!(slots >= 1.0 && slots <= cfg.n_s_max as f64);
    }

    // the communication-only variant of the same scenario never hovers and
    // costs no more
    let ns = alternate(&cfg, &beam, &AoSettings::new(&cfg, Mode::NoSense)).unwrap();
    assert_eq!(ns.cfg.e(), 0);
    assert!(ns.objective <= run.objective);
}
