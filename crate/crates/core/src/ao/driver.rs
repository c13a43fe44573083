//! The alternating loop: resource subproblem, trajectory subproblem, new
//! expansion point, until the tracked objective settles. A terminal phase
//! rounds the schedule, re-solves both blocks at the binary schedule,
//! extracts beamformers and audits the result.

use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::ao::audit::{audit_with, AuditReport};
use crate::ao::init::{fixed_speed_path, initialize, target_waypoints, InitialPoint};
use crate::ao::precheck::{feasibility_precheck, PrecheckReport};
use crate::ao::rank_one::BeamExtraction;
use crate::ao::rounding::{round_schedule, RoundingReport};
use crate::ao::sp1::{solve_sp1, BeamShape, ScheduleSpec, Sp1Result, Sp1Setup, Sp1Stage};
use crate::ao::sp2::{solve_sp2, PathConstraint, Sp2Setup};
use crate::ao::Scales;
use crate::baselines::zf_beamformers;
use crate::beampattern::SensingBeam;
use crate::comms::sinr_terms;
use crate::conic::{ConicSettings, ConicStatus};
use crate::error::{Error, Result};
use crate::power::{objective, objective_breakdown, y_from_v, PowerBreakdown};
use crate::scenario::{CVector, ScenarioConfig};
use crate::state::{RAState, SensingSchedule, Trajectory};
use crate::surrogates::ExpansionPoint;

/// Which scheme to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Joint design of schedule, resources and trajectory.
    Proposed,
    /// Nearest-neighbour tour over users and targets; only the progress
    /// along each straight segment (hence the speed profile) is optimized.
    Baseline1,
    /// Zero-forcing directions and a path flown at a fixed speed.
    Baseline2 { speed: f64 },
    /// Communication only: targets removed.
    NoSense,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Proposed => f.write_str("proposed"),
            Mode::Baseline1 => f.write_str("baseline1"),
            Mode::Baseline2 { .. } => f.write_str("baseline2"),
            Mode::NoSense => f.write_str("nosense"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AoSettings {
    pub mode: Mode,
    pub eps_ao: f64,
    pub max_iters: usize,
    pub conic: ConicSettings,
    pub seed: u64,
}

impl AoSettings {
    pub fn new(cfg: &ScenarioConfig, mode: Mode) -> Self {
        AoSettings {
            mode,
            eps_ao: cfg.solver.eps_ao,
            max_iters: cfg.solver.max_ao_iters,
            conic: ConicSettings { tol: cfg.solver.conic_tol, ..ConicSettings::default() },
            seed: cfg.solver.seed,
        }
    }
}

/// One AO iteration.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Tracked objective after the resource step.
    pub objective_resource: f64,
    /// Tracked objective after the trajectory step (equal to the resource
    /// value when the trajectory is fixed).
    pub objective: f64,
    pub tau1_term: f64,
    pub tau2_term: f64,
    pub binary_gap: f64,
    pub hover_gap: f64,
    pub resource_status: String,
    pub trajectory_status: String,
    pub resource_time: f64,
    pub trajectory_time: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
#[allow(clippy::upper_case_acronyms)]
pub struct AOTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl AOTrace {
    /// Sequence of tracked objectives in half-step order, starting with the
    /// first resource step.
    pub fn half_steps(&self) -> Vec<f64> {
        self.records.iter().flat_map(|r| [r.objective_resource, r.objective]).collect()
    }

    /// Largest relative increase between consecutive half-steps.
    pub fn worst_uptick(&self) -> f64 {
        self.half_steps()
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

/// Final result of one run.
#[derive(Debug, Clone)]
pub struct AoRun {
    pub mode: Mode,
    /// Configuration the run actually used (targets removed for
    /// [`Mode::NoSense`]).
    pub cfg: ScenarioConfig,
    pub precheck: PrecheckReport,
    pub trajectory: Trajectory,
    /// Binary schedule after rounding.
    pub schedule: SensingSchedule,
    /// Schedule at the end of the loop, before rounding.
    pub relaxed: SensingSchedule,
    pub state: RAState,
    pub rounding: RoundingReport,
    pub beams: BeamExtraction,
    pub audit: AuditReport,
    pub trace: AOTrace,
    /// Average power (W) of the final point.
    pub objective: f64,
    pub breakdown: PowerBreakdown,
    pub wall_time: f64,
}

/// A run that stopped on a subproblem failure, with the trace so far.
#[derive(Debug)]
pub struct AoAbort {
    pub error: Error,
    pub trace: AOTrace,
}

impl fmt::Display for AoAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} AO iterations)", self.error, self.trace.records.len())
    }
}

impl std::error::Error for AoAbort {}

impl From<AoAbort> for Error {
    fn from(a: AoAbort) -> Error {
        a.error
    }
}

/// Average power plus both penalty terms.
pub fn tracked_objective(state: &RAState, schedule: &SensingSchedule, traj: &Trajectory, cfg: &ScenarioConfig) -> f64 {
    let (t1, t2) = penalty_terms(schedule, traj, cfg);
    objective(state, schedule, traj, cfg) + t1 + t2
}

fn penalty_terms(schedule: &SensingSchedule, traj: &Trajectory, cfg: &ScenarioConfig) -> (f64, f64) {
    let t1 = cfg.solver.tau1 * schedule.binary_residual();
    let mut t2 = 0.0;
    for (e, row) in schedule.alpha.iter().enumerate() {
        for (n, a) in row.iter().enumerate() {
            t2 += a * (traj.q[n] - cfg.targets[e]).norm_squared();
        }
    }
    (t1, cfg.solver.tau2 * t2)
}

/// Expansion point consistent with a primal point: SINR and normalized
/// interference-plus-noise at the current positions.
pub fn expansion_at(
    iteration: usize,
    cfg: &ScenarioConfig,
    traj: &Trajectory,
    schedule: &SensingSchedule,
    state: &RAState,
) -> ExpansionPoint {
    let (kk, nn) = (cfg.k(), cfg.n_slots);
    let s_w = Scales::new(cfg).w;
    let mut mu = vec![vec![0.0; nn]; kk];
    let mut phi = vec![vec![0.0; nn]; kk];
    for n in 0..nn {
        let slot: Vec<_> = state.w.iter().map(|r| r[n].clone()).collect();
        for k in 0..kk {
            let (sig, inf) = sinr_terms(k, &slot, &traj.q[n], cfg);
            mu[k][n] = (sig / inf).max(0.0);
            phi[k][n] = inf / s_w;
        }
    }
    ExpansionPoint {
        iteration,
        mu_prime_t: mu.clone(),
        beta_t: phi.clone(),
        mu_t: mu,
        phi_t: phi,
        mu_ke_t: vec![vec![vec![0.0; nn]; cfg.e()]; kk],
        alpha_t: schedule.alpha.clone(),
        q_t: traj.q.clone(),
        v_t: traj.v.clone(),
        y_t: traj.v.iter().map(|v| y_from_v(v, cfg.aero.v0)).collect(),
    }
}

/// Expansion point for the first resource step, where no beamformers exist
/// yet: the SINR each user needs if its rate is spread evenly over the
/// communication slots, and noise-only interference. Where the beam gain
/// towards a user (fixed `directions`, or full array gain otherwise) cannot
/// reach that SINR within the power cap, the slot's target is lowered so
/// the first surrogate stays feasible.
pub fn initial_expansion(
    cfg: &ScenarioConfig,
    traj: &Trajectory,
    schedule: &SensingSchedule,
    directions: Option<&[Vec<CVector>]>,
) -> ExpansionPoint {
    let mut exp = expansion_at(0, cfg, traj, schedule, &RAState::zeros(cfg));
    let comm: f64 = (0..cfg.n_slots).map(|n| (1.0 - schedule.slot_sum(n)).max(0.0)).sum();
    let h2 = cfg.altitude * cfg.altitude;
    let w_cap = Scales::new(cfg).w_cap;
    for k in 0..cfg.k() {
        let target = 2f64.powf(cfg.r_min_rate[k] * cfg.n_slots as f64 / comm.max(1e-9)) - 1.0;
        for n in 0..cfg.n_slots {
            let noise = cfg.dist_sq(&traj.q[n], &cfg.users[k]) / h2;
            let gain = match directions {
                Some(d) => cfg.steering(&traj.q[n], &cfg.users[k]).dotc(&d[k][n]).norm_sqr(),
                None => cfg.n_antennas as f64,
            };
            let mu = target.min(0.5 * w_cap * gain / noise);
            exp.mu_t[k][n] = mu;
            exp.mu_prime_t[k][n] = mu;
            exp.phi_t[k][n] = noise;
            exp.beta_t[k][n] = noise;
        }
    }
    exp
}

fn zf_directions(cfg: &ScenarioConfig, traj: &Trajectory) -> Result<Vec<Vec<CVector>>> {
    let mut out = vec![Vec::with_capacity(cfg.n_slots); cfg.k()];
    for n in 0..cfg.n_slots {
        let h: Vec<CVector> = (0..cfg.k()).map(|k| cfg.channel(&traj.q[n], k)).collect();
        for (k, d) in zf_beamformers(&h)?.into_iter().enumerate() {
            out[k].push(d);
        }
    }
    Ok(out)
}

fn starting_point(cfg: &ScenarioConfig, beam: &SensingBeam, mode: Mode) -> Result<InitialPoint> {
    match mode {
        Mode::Proposed | Mode::NoSense => initialize(cfg, beam),
        Mode::Baseline1 => crate::baselines::heuristic_path(cfg, beam),
        Mode::Baseline2 { speed } => fixed_speed_path(cfg, &target_waypoints(cfg, beam), speed),
    }
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    beam: &'a SensingBeam,
    settings: &'a AoSettings,
    segments: Vec<(crate::scenario::Vec2, crate::scenario::Vec2)>,
}

impl Ctx<'_> {
    fn shape_for(&self, traj: &Trajectory) -> Result<Option<Vec<Vec<CVector>>>> {
        match self.settings.mode {
            Mode::Baseline2 { .. } => zf_directions(self.cfg, traj).map(Some),
            _ => Ok(None),
        }
    }

    /// Resource step: joint solve (unless the schedule is given), then the
    /// polish at the resulting schedule.
    fn resource(
        &self,
        iteration: usize,
        traj: &Trajectory,
        exp: &ExpansionPoint,
        fixed: Option<&SensingSchedule>,
    ) -> Result<(Sp1Result, f64)> {
        let dirs = self.shape_for(traj)?;
        let shape = dirs.as_deref().map_or(BeamShape::Covariance, BeamShape::Directions);
        let mut time = 0.0;
        let schedule = match fixed {
            Some(s) => s.clone(),
            None => {
                let joint = solve_sp1(
                    &Sp1Setup {
                        cfg: self.cfg,
                        beam: self.beam,
                        traj,
                        expansion: exp,
                        schedule: ScheduleSpec::Free,
                        stage: Sp1Stage::Joint,
                        shape,
                    },
                    &self.settings.conic,
                )?;
                time += joint.solve_time;
                log::debug!("iteration {iteration}: joint resource step {} in {:.2}s", joint.status, joint.solve_time);
                joint.schedule
            }
        };
        let polish = solve_sp1(
            &Sp1Setup {
                cfg: self.cfg,
                beam: self.beam,
                traj,
                expansion: exp,
                schedule: ScheduleSpec::Fixed(&schedule),
                stage: Sp1Stage::Polish,
                shape,
            },
            &self.settings.conic,
        )?;
        time += polish.solve_time;
        Ok((polish, time))
    }

    fn trajectory(
        &self,
        traj: &Trajectory,
        schedule: &SensingSchedule,
        state: &RAState,
        iteration: usize,
    ) -> Result<Option<(Trajectory, ConicStatus, f64)>> {
        let path = match self.settings.mode {
            Mode::Baseline2 { .. } => return Ok(None),
            Mode::Baseline1 => PathConstraint::Segments(&self.segments),
            Mode::Proposed | Mode::NoSense => PathConstraint::Free,
        };
        let exp = expansion_at(iteration, self.cfg, traj, schedule, state);
        let r = solve_sp2(
            &Sp2Setup { cfg: self.cfg, state, schedule, expansion: &exp, path, accel_limit: true },
            &self.settings.conic,
        )?;
        Ok(Some((r.trajectory, r.status, r.solve_time)))
    }
}

/// Runs the alternating optimization for `settings.mode`.
pub fn alternate(cfg: &ScenarioConfig, beam: &SensingBeam, settings: &AoSettings) -> std::result::Result<AoRun, AoAbort> {
    let mut trace = AOTrace::default();
    match run(cfg, beam, settings, None, None, &mut trace) {
        Ok(r) => Ok(r),
        Err(error) => Err(AoAbort { error, trace }),
    }
}

/// Runs the alternating optimization from a given starting point,
/// optionally keeping the sensing schedule fixed throughout.
pub fn alternate_from(
    cfg: &ScenarioConfig,
    beam: &SensingBeam,
    settings: &AoSettings,
    init: InitialPoint,
    fixed: Option<&SensingSchedule>,
) -> std::result::Result<AoRun, AoAbort> {
    let mut trace = AOTrace::default();
    match run(cfg, beam, settings, Some(init), fixed, &mut trace) {
        Ok(r) => Ok(r),
        Err(error) => Err(AoAbort { error, trace }),
    }
}

fn run(
    cfg_in: &ScenarioConfig,
    beam: &SensingBeam,
    settings: &AoSettings,
    init: Option<InitialPoint>,
    fixed: Option<&SensingSchedule>,
    trace: &mut AOTrace,
) -> Result<AoRun> {
    let start = Instant::now();
    let mut cfg = cfg_in.clone();
    if settings.mode == Mode::NoSense {
        cfg.targets.clear();
        cfg.snr_th.clear();
        cfg.rcs.clear();
    }
    let cfg = &cfg;
    cfg.validate()?;
    let precheck = feasibility_precheck(cfg, beam);
    if !precheck.feasible {
        return Err(Error::Infeasible(precheck.to_string()));
    }
    let init = match init {
        Some(i) => i,
        None => starting_point(cfg, beam, settings.mode)?,
    };
    if let Some(f) = fixed {
        if f.alpha.len() != cfg.e() || f.alpha.iter().any(|r| r.len() != cfg.n_slots) || !f.is_binary() {
            return Err(Error::Validation("fixed schedule must be binary and match the scenario".into()));
        }
    }
    let ctx = Ctx { cfg, beam, settings, segments: init.segments.clone() };
    let mut traj = init.trajectory;
    let mut schedule = fixed.cloned().unwrap_or(init.schedule);
    let mut state = RAState::zeros(cfg);
    let mut previous: Option<f64> = None;

    for it in 1..=settings.max_iters.max(1) {
        let exp = if it == 1 {
            initial_expansion(cfg, &traj, &schedule, ctx.shape_for(&traj)?.as_deref())
        } else {
            expansion_at(it, cfg, &traj, &schedule, &state)
        };
        let (sp1, t1) = ctx.resource(it, &traj, &exp, fixed)?;
        schedule = sp1.schedule;
        state = sp1.state;
        let obj_res = tracked_objective(&state, &schedule, &traj, cfg);
        let (traj_status, t2) = match ctx.trajectory(&traj, &schedule, &state, it)? {
            Some((t, status, time)) => {
                traj = t;
                (status.to_string(), time)
            }
            None => ("fixed".to_string(), 0.0),
        };
        let obj = tracked_objective(&state, &schedule, &traj, cfg);
        let rel = previous.map_or(1.0, |p| ((p - obj) / p.abs().max(f64::MIN_POSITIVE)).abs());
        let (tau1_term, tau2_term) = penalty_terms(&schedule, &traj, cfg);
        trace.records.push(IterationRecord {
            iteration: it,
            objective_resource: obj_res,
            objective: obj,
            tau1_term,
            tau2_term,
            binary_gap: schedule.binary_gap(),
            hover_gap: traj.hover_gap(&schedule, cfg),
            resource_status: sp1.status.to_string(),
            trajectory_status: traj_status,
            resource_time: t1,
            trajectory_time: t2,
            relative_change: rel,
        });
        log::info!("{} iteration {it}: objective {obj:.6} W (relative change {rel:.3e})", settings.mode);
        previous = Some(obj);
        if rel <= settings.eps_ao {
            trace.converged = true;
            break;
        }
    }

    // terminal phase at the binary schedule
    let relaxed = schedule.clone();
    let (binary, rounding) = round_schedule(&relaxed, cfg.n_s_max);
    let final_iter = trace.records.len() + 1;
    let exp = expansion_at(final_iter, cfg, &traj, &binary, &state);
    let (sp1, _) = ctx.resource(final_iter, &traj, &exp, Some(&binary))?;
    state = sp1.state;
    if let Some((t, _, _)) = ctx.trajectory(&traj, &binary, &state, final_iter)? {
        traj = t;
        let exp = expansion_at(final_iter + 1, cfg, &traj, &binary, &state);
        let (sp1, _) = ctx.resource(final_iter + 1, &traj, &exp, Some(&binary))?;
        state = sp1.state;
    }
    state.sync_products(&binary);
    let beams = BeamExtraction::from_covariances(&state.w, &traj.q, cfg, settings.seed);
    let accel_limit = !matches!(settings.mode, Mode::Baseline2 { .. });
    let audit = audit_with(&state, &binary, &traj, beam, cfg, accel_limit);
    let objective = objective(&state, &binary, &traj, cfg);
    let breakdown = objective_breakdown(&state, &binary, &traj, cfg);
    Ok(AoRun {
        mode: settings.mode,
        cfg: cfg.clone(),
        precheck,
        trajectory: traj,
        schedule: binary,
        relaxed,
        state,
        rounding,
        beams,
        audit,
        trace: trace.clone(),
        objective,
        breakdown,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
