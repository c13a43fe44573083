//! Independent validators: a Monte-Carlo simulation of the radar echo chain,
//! an exhaustive search over sensing schedules for tiny instances, and a
//! central-difference gradient.
//!
//! The Monte-Carlo estimator simulates the echo signal model directly
//! (transmit covariance, round-trip channel, receive beamformer, noise) and
//! never calls the closed-form SNR expressions, so agreement between the two
//! is a genuine check.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::ao::{alternate, alternate_from, hover_pattern_path, AoSettings, Mode};
use crate::beampattern::SensingBeam;
use crate::error::{Error, Result};
use crate::linalg::{herm_eig, CMatrix};
use crate::power::min_power_speed;
use crate::scenario::{CVector, ScenarioConfig, Vec2};
use crate::sensing::per_slot_snr;
use crate::state::SensingSchedule;
use crate::surrogates::{trace_term_gradient, trace_term_j};

/// Smallest trial count accepted by the Monte-Carlo estimator.
pub const MIN_TRIALS: usize = 10_000;

/// One sensing slot seen by the Monte-Carlo estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoSlot {
    pub q: Vec2,
    /// Peak radar power (W).
    pub p_rad: f64,
    /// Sensing share of the slot (the combining weight).
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// 95 % confidence interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: usize,
}

impl McEstimate {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// Empirical accumulated SNR of a single slot.
pub fn mc_echo_snr(
    q: &Vec2,
    target: &Vec2,
    rcs: f64,
    p_rad: f64,
    beam: &SensingBeam,
    cfg: &ScenarioConfig,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    mc_echo_snr_slots(&[EchoSlot { q: *q, p_rad, alpha: 1.0 }], target, rcs, beam, cfg, trials, seed)
}

/// Empirical accumulated SNR over several slots.
///
/// Per trial and slot: the probing vector is drawn as `s ~ CN(0, p_rad R_d)`,
/// reflected by the rank-one round-trip channel of the target, combined
/// with the unit-norm matched receive beamformer and integrated coherently
/// over the `N_s` rounds of the slot. Each round adds independent
/// `CN(0, sigma_e^2)` noise; their sum is drawn directly as
/// `CN(0, N_s sigma_e^2)`, which has exactly the same distribution.
/// The signal and noise parts of every trial are kept apart (paired runs),
/// and the slot SNR is estimated as mean signal energy over mean noise
/// energy; maximum-ratio combining across slots adds these up with the
/// sensing shares as weights. The interval uses the delta method on each
/// ratio of means.
pub fn mc_echo_snr_slots(
    slots: &[EchoSlot],
    target: &Vec2,
    rcs: f64,
    beam: &SensingBeam,
    cfg: &ScenarioConfig,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::Validation(format!("Monte-Carlo needs at least {MIN_TRIALS} trials, got {trials}")));
    }
    if slots.iter().any(|s| !(s.p_rad >= 0.0) || !(0.0..=1.0).contains(&s.alpha)) {
        return Err(Error::Validation("slot powers must be >= 0 and shares in [0, 1]".into()));
    }
    let m = cfg.n_antennas;
    // square root of the transmit covariance shape
    let (vals, vecs) = herm_eig(&beam.r_d);
    let roots: Vec<(f64, &CVector)> = vals.iter().map(|l| l.max(0.0).sqrt()).zip(&vecs).collect();
    let rounds = cfg.n_s();
    let noise_sd = (rounds * cfg.sigma2_e).sqrt();

    let mut estimate = 0.0;
    let mut variance = 0.0;
    for (slot_index, slot) in slots.iter().enumerate() {
        if slot.alpha == 0.0 {
            continue;
        }
        let a = cfg.steering(&slot.q, target);
        let psi_sq = cfg.dist_sq(&slot.q, target);
        // round-trip channel (eps beta0 / (2 Psi)) a a^H with eps^2 = rcs / (4 pi Psi^2)
        let eps = (rcs / (4.0 * std::f64::consts::PI * psi_sq)).sqrt();
        let channel_amp = eps * cfg.beta0 / (2.0 * psi_sq.sqrt());
        let u = &a / Complex64::new((m as f64).sqrt(), 0.0);
        // u^H (a a^H) s = (u^H a) (a^H s)
        let ua = u.dotc(&a);
        let per_round = channel_amp * (cfg.radar.t_p / cfg.delta_t).sqrt();
        let scale = ua * Complex64::new(rounds * per_round * slot.p_rad.sqrt(), 0.0);

        let draws: Vec<(f64, f64)> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((slot_index as u64) << 40) | trial as u64);
                let mut s = CVector::zeros(m);
                for (root, v) in &roots {
                    s += *v * (cn(&mut rng) * *root);
                }
                let signal = scale * a.dotc(&s);
                let noise = cn(&mut rng) * noise_sd;
                (signal.norm_sqr(), noise.norm_sqr())
            })
            .collect();
        let n = trials as f64;
        let (mut sx, mut sy) = (0.0, 0.0);
        for (x, y) in &draws {
            sx += x;
            sy += y;
        }
        let (mx, my) = (sx / n, sy / n);
        let (mut vxx, mut vyy, mut vxy) = (0.0, 0.0, 0.0);
        for (x, y) in &draws {
            vxx += (x - mx) * (x - mx);
            vyy += (y - my) * (y - my);
            vxy += (x - mx) * (y - my);
        }
        let (vxx, vyy, vxy) = (vxx / (n - 1.0), vyy / (n - 1.0), vxy / (n - 1.0));
        let ratio = mx / my;
        let var_ratio = (vxx / (my * my) - 2.0 * mx * vxy / (my * my * my) + mx * mx * vyy / (my * my * my * my)) / n;
        estimate += slot.alpha * ratio;
        variance += slot.alpha * slot.alpha * var_ratio.max(0.0);
    }
    let half = 1.96 * variance.sqrt();
    Ok(McEstimate { estimate, ci_low: estimate - half, ci_high: estimate + half, trials })
}

/// Standard circularly-symmetric complex normal draw.
fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

/// Outcome of one schedule pattern in [`enumerate_alpha`].
#[derive(Debug, Clone, Serialize)]
pub struct PatternOutcome {
    /// Hover (sensing) slot indices.
    pub slots: Vec<usize>,
    /// Audited objective, `None` when the pattern is infeasible.
    pub objective: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Enumeration {
    pub outcomes: Vec<PatternOutcome>,
    pub best_objective: f64,
    pub best_schedule: SensingSchedule,
}

impl Enumeration {
    pub fn evaluated(&self) -> usize {
        self.outcomes.len()
    }

    pub fn feasible(&self) -> usize {
        self.outcomes.iter().filter(|o| o.objective.is_some()).count()
    }
}

/// Number of binary single-target schedules over `n` slots with at most
/// `budget` sensing slots.
pub fn pattern_count(n: usize, budget: usize) -> usize {
    let mut total = 0usize;
    let mut binom = 1usize;
    for j in 0..=budget.min(n) {
        total += binom;
        binom = binom * (n - j) / (j + 1);
    }
    total
}

/// Exhaustive search over every binary schedule of a single-target instance
/// with at most six slots. Each pattern runs the alternating optimization
/// with the schedule held fixed from a path that hovers over the target in
/// the chosen slots (flown both straight and loitering); the best audited
/// objective wins.
pub fn enumerate_alpha(cfg: &ScenarioConfig, beam: &SensingBeam) -> Result<Enumeration> {
    let n = cfg.n_slots;
    if cfg.e() != 1 {
        return Err(Error::Validation(format!("enumeration needs exactly one target, got {}", cfg.e())));
    }
    if n > 6 {
        return Err(Error::Validation(format!("enumeration needs at most 6 slots (2^N <= 64), got {n}")));
    }
    cfg.validate()?;
    let patterns: Vec<Vec<usize>> = (0u32..(1 << n))
        .filter(|mask| mask.count_ones() as usize <= cfg.n_s_max)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    let settings = AoSettings::new(cfg, Mode::Proposed);
    let cruise = min_power_speed(&cfg.aero, cfg.v_max);
    let outcomes: Vec<PatternOutcome> = patterns
        .par_iter()
        .map(|slots| {
            // straight and loitering starts reach different local optima
            let mut objective: Option<f64> = None;
            let mut notes = Vec::new();
            for loiter in [None, Some(cruise)] {
                match run_pattern(cfg, beam, &settings, slots, loiter) {
                    Ok(v) => objective = Some(objective.map_or(v, |o: f64| o.min(v))),
                    Err(note) => notes.push(note),
                }
            }
            let note = if objective.is_some() { "ok".to_string() } else { notes.join("; ") };
            PatternOutcome { slots: slots.clone(), objective, note }
        })
        .collect();
    let best = outcomes
        .iter()
        .filter_map(|o| o.objective.map(|v| (v, o)))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        None => Err(Error::Infeasible(format!("all {} schedule patterns are infeasible", outcomes.len()))),
        Some((best_objective, o)) => {
            let mut best_schedule = SensingSchedule::zeros(1, n);
            for s in &o.slots {
                best_schedule.alpha[0][*s] = 1.0;
            }
            Ok(Enumeration { best_objective, best_schedule, outcomes })
        }
    }
}

fn run_pattern(
    cfg: &ScenarioConfig,
    beam: &SensingBeam,
    settings: &AoSettings,
    slots: &[usize],
    loiter: Option<f64>,
) -> std::result::Result<f64, String> {
    let init = hover_pattern_path(cfg, 0, slots, loiter).map_err(|e| e.to_string())?;
    let schedule = init.schedule.clone();
    match alternate_from(cfg, beam, settings, init, Some(&schedule)) {
        Ok(run) if run.audit.passed() => Ok(run.objective),
        Ok(run) => {
            let failed: Vec<_> = run.audit.failures().iter().map(|l| l.constraint.clone()).collect();
            Err(format!("audit failed: {}", failed.join(", ")))
        }
        Err(abort) => Err(abort.error.to_string()),
    }
}

/// One line of the oracle report: an independent estimate against the
/// library's closed form.
#[derive(Debug, Clone, Serialize)]
pub struct OracleCheck {
    pub check: String,
    pub estimate: f64,
    pub reference: f64,
    /// `(estimate - reference) / reference`, or the worst relative error
    /// for multi-instance checks.
    pub rel_error: f64,
    pub tolerance: f64,
    /// Informational lines document a known, explained discrepancy and
    /// always pass.
    pub informational: bool,
    pub passed: bool,
    pub note: String,
}

impl OracleCheck {
    fn new(check: &str, estimate: f64, reference: f64, rel_error: f64, tolerance: f64, note: String) -> Self {
        OracleCheck {
            check: check.to_string(),
            estimate,
            reference,
            rel_error,
            tolerance,
            informational: false,
            passed: rel_error.abs() <= tolerance,
            note,
        }
    }
}

/// Monte-Carlo echo SNR of one slot hovering `offset` metres from the
/// first target of `cfg`, against the closed-form slot SNR.
///
/// The simulated receiver integrates the echo over all `M` antennas, so for
/// `M > 1` it sees `M` times the closed-form SNR, which omits the receive
/// array gain. The check compares against the closed form at `M = 1`; for
/// larger arrays the line is informational and reports the ratio.
pub fn echo_snr_check(
    cfg: &ScenarioConfig,
    beam: &SensingBeam,
    offset: Vec2,
    p_rad: f64,
    trials: usize,
    seed: u64,
) -> Result<OracleCheck> {
    if cfg.e() == 0 {
        return Err(Error::Validation("echo check needs a target".into()));
    }
    let d = cfg.targets[0];
    let q = d + offset;
    let closed = per_slot_snr(&q, 0, p_rad, beam, cfg);
    let mc = mc_echo_snr(&q, &d, cfg.rcs[0], p_rad, beam, cfg, trials, seed)?;
    let m = cfg.n_antennas;
    let name = format!("echo_snr_m{m}");
    let note = format!("{trials} trials, 95% CI [{:.6e}, {:.6e}]", mc.ci_low, mc.ci_high);
    if m == 1 {
        Ok(OracleCheck::new(&name, mc.estimate, closed, (mc.estimate - closed) / closed, 0.03, note))
    } else {
        let ratio = mc.estimate / closed;
        Ok(OracleCheck {
            informational: true,
            passed: true,
            note: format!("{note}; ratio to closed form {ratio:.4} (receive array gain {m})"),
            ..OracleCheck::new(&name, mc.estimate, closed, (mc.estimate - closed) / closed, f64::INFINITY, String::new())
        })
    }
}

/// Analytic gradient of the pairwise trace term against central finite
/// differences on `instances` random (covariance, position, target) draws.
pub fn gradient_check(cfg: &ScenarioConfig, instances: usize, seed: u64) -> OracleCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = cfg.n_antennas;
    let span = cfg.area_size;
    let mut worst: f64 = 0.0;
    let (mut at_an, mut at_fd) = (0.0, 0.0);
    for _ in 0..instances {
        let g = CMatrix::from_fn(m, m, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let w = &g * g.adjoint();
        let q = Vec2::new(rng.gen_range(0.0..span), rng.gen_range(0.0..span));
        let d = Vec2::new(rng.gen_range(0.0..span), rng.gen_range(0.0..span));
        let an = trace_term_gradient(&w, &q, &d, cfg);
        let fd = finite_diff(|p| trace_term_j(&w, p, &d, cfg).1, &q, 1e-4).expect("positive step");
        // near-zero gradients are compared on the scale of the covariance
        let scale = an.norm().max(fd.norm()).max(1e-6 * w.norm() * cfg.beta0_sq());
        let rel = (an - fd).norm() / scale;
        if rel >= worst {
            worst = rel;
            at_an = an.norm();
            at_fd = fd.norm();
        }
    }
    OracleCheck::new(
        "trace_term_gradient",
        at_an,
        at_fd,
        worst,
        1e-5,
        format!("{instances} random instances, worst relative error shown"),
    )
}

/// Alternating optimization on a small single-target instance against the
/// exhaustive schedule search. Passes when the AO objective is at most 5 %
/// above the enumerated best (being below it is fine: the enumeration runs
/// the same local solver per pattern).
pub fn enumeration_check(cfg: &ScenarioConfig, beam: &SensingBeam) -> Result<OracleCheck> {
    let en = enumerate_alpha(cfg, beam)?;
    let run = alternate(cfg, beam, &AoSettings::new(cfg, Mode::Proposed)).map_err(Error::from)?;
    let gap = (run.objective - en.best_objective) / en.best_objective;
    let mut c = OracleCheck::new(
        "ao_vs_enumeration",
        run.objective,
        en.best_objective,
        gap,
        0.05,
        format!(
            "{} of {} patterns feasible; AO audit {}",
            en.feasible(),
            en.evaluated(),
            if run.audit.passed() { "passed" } else { "failed" }
        ),
    );
    c.passed = gap <= 0.05 && run.audit.passed();
    Ok(c)
}

/// Central-difference gradient of a scalar field over the plane.
pub fn finite_diff(f: impl Fn(&Vec2) -> f64, q: &Vec2, h: f64) -> Result<Vec2> {
    if !(h > 0.0) {
        return Err(Error::Validation(format!("finite-difference step must be > 0, got {h}")));
    }
    let ex = Vec2::new(h, 0.0);
    let ey = Vec2::new(0.0, h);
    Ok(Vec2::new((f(&(q + ex)) - f(&(q - ex))) / (2.0 * h), (f(&(q + ey)) - f(&(q - ey))) / (2.0 * h)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beampattern::scenario_beam;

    fn one_antenna() -> (ScenarioConfig, SensingBeam) {
        let mut cfg = ScenarioConfig::desk();
        cfg.n_antennas = 1;
        let beam = SensingBeam::isotropic(&cfg);
        (cfg, beam)
    }

    #[test]
    fn finite_diff_examples() {
        let g = finite_diff(|q| q.norm_squared(), &Vec2::new(1.0, 2.0), 1e-4).unwrap();
        assert!((g - Vec2::new(2.0, 4.0)).norm() < 1e-6);
        assert_eq!(finite_diff(|_| 3.0, &Vec2::new(5.0, -1.0), 1e-3).unwrap(), Vec2::zeros());
        assert!(finite_diff(|_| 0.0, &Vec2::zeros(), 0.0).is_err());
    }

    #[test]
    fn finite_diff_matches_trace_term_gradient() {
        let c = gradient_check(&ScenarioConfig::desk(), 20, 3);
        assert!(c.passed, "{c:?}");
    }

    #[test]
    fn echo_check_lines() {
        let (cfg, beam) = one_antenna();
        let c = echo_snr_check(&cfg, &beam, Vec2::new(5.0, -3.0), 10.0, 20_000, 2).unwrap();
        assert!(!c.informational && c.tolerance == 0.03);
        let cfg4 = ScenarioConfig::desk();
        let beam4 = SensingBeam::isotropic(&cfg4);
        let c = echo_snr_check(&cfg4, &beam4, Vec2::zeros(), 10.0, MIN_TRIALS, 2).unwrap();
        assert!(c.informational && c.passed);
        // the simulated receiver adds the array gain
        assert!((c.estimate / c.reference / 4.0 - 1.0).abs() < 0.1, "{c:?}");
    }

    #[test]
    fn zero_power_gives_zero_estimate() {
        let (cfg, beam) = one_antenna();
        let r = mc_echo_snr(&cfg.targets[0], &cfg.targets[0], cfg.rcs[0], 0.0, &beam, &cfg, MIN_TRIALS, 1).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert!(r.contains(0.0));
    }

    #[test]
    fn too_few_trials_rejected() {
        let (cfg, beam) = one_antenna();
        assert!(mc_echo_snr(&cfg.targets[0], &cfg.targets[0], 0.1, 1.0, &beam, &cfg, 10, 1).is_err());
    }

    #[test]
    fn single_slot_matches_closed_form() {
        let (cfg, beam) = one_antenna();
        let d = cfg.targets[0];
        let q = d + Vec2::new(5.0, -3.0);
        let closed = per_slot_snr(&q, 0, 10.0, &beam, &cfg);
        let r = mc_echo_snr(&q, &d, cfg.rcs[0], 10.0, &beam, &cfg, 40_000, 11).unwrap();
        assert!((r.estimate - closed).abs() / closed < 0.05, "{} vs {closed}", r.estimate);
    }

    #[test]
    fn deterministic_for_seed_and_additive_over_slots() {
        let (cfg, beam) = one_antenna();
        let d = cfg.targets[0];
        let one = EchoSlot { q: d, p_rad: 5.0, alpha: 1.0 };
        let a = mc_echo_snr_slots(&[one], &d, 0.1, &beam, &cfg, MIN_TRIALS, 4).unwrap();
        let b = mc_echo_snr_slots(&[one], &d, 0.1, &beam, &cfg, MIN_TRIALS, 4).unwrap();
        assert_eq!(a, b);
        let two = mc_echo_snr_slots(&[one, one], &d, 0.1, &beam, &cfg, MIN_TRIALS, 4).unwrap();
        assert!((two.estimate / a.estimate - 2.0).abs() < 0.1, "{}", two.estimate / a.estimate);
    }

    #[test]
    fn interval_shrinks_with_trials() {
        let (cfg, beam) = one_antenna();
        let d = cfg.targets[0];
        let small = mc_echo_snr(&d, &d, 0.1, 5.0, &beam, &cfg, 10_000, 9).unwrap();
        let large = mc_echo_snr(&d, &d, 0.1, 5.0, &beam, &cfg, 40_000, 9).unwrap();
        let ratio = small.half_width() / large.half_width();
        assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
    }

    #[test]
    fn pattern_counts() {
        assert_eq!(pattern_count(6, 6), 64);
        assert_eq!(pattern_count(6, 0), 1);
        assert_eq!(pattern_count(6, 2), 1 + 6 + 15);
        assert_eq!(pattern_count(5, 3), 1 + 5 + 10 + 10);
    }

    #[test]
    fn enumeration_preconditions() {
        let cfg = ScenarioConfig::desk();
        let beam = scenario_beam(&cfg).unwrap();
        assert!(matches!(enumerate_alpha(&cfg, &beam), Err(Error::Validation(_))));
    }
}
