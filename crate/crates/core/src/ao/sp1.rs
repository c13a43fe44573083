//! Resource subproblem for a fixed trajectory: downlink covariances (SDR),
//! radar and offloading powers with their big-M products, and the relaxed
//! sensing schedule.
//!
//! Two deliberate departures from the textbook form keep the surrogate
//! conservative and the program well posed:
//!
//! * The per-slot rate is an epigraph `t <= ln(1 + mu)` together with
//!   `t <= (1 - sum_e alpha) * C`, where `C` bounds any achievable rate. At a
//!   binary schedule this is exactly the gated rate `(1 - alpha) log(1 + mu)`.
//!   The per-target SINR variables of the textbook form only carry upper
//!   bounds, so the optimizer would set them to zero; their tangent
//!   surrogate would then pin the interference bound to its expansion point.
//!   They are therefore kept at zero in the state and not modelled.
//! * The lower big-M bound on the radar and offloading products reads
//!   `x_tilde >= x - (1 - alpha) M`, which is the direction that makes the
//!   product equal `alpha * x` at binary `alpha`.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::ao::{Scales, ALPHA_EPS, ALPHA_SNAP, FEAS_MARGIN, HOVER_SPEED};
use crate::beampattern::SensingBeam;
use crate::conic::{solve_checked, Affine, ConicProgram, ConicSettings, ConicStatus, HermExpr, HermVar, VarId};
use crate::error::{Error, Result};
use crate::linalg::{hermitize, outer, project_psd, CMatrix};
use crate::power::{p_fly, p_hover};
use crate::scenario::{CVector, ScenarioConfig};
use crate::sensing::snr_per_radiated_watt;
use crate::state::{RAState, SensingSchedule, Trajectory};
use crate::surrogates::ExpansionPoint;

/// How the downlink covariances are parameterized.
#[derive(Debug, Clone, Copy)]
pub enum BeamShape<'a> {
    /// Full Hermitian PSD covariance per user and slot (SDR).
    Covariance,
    /// Fixed unit-norm direction per user and slot (`[k][n]`); only the
    /// power is optimized.
    Directions(&'a [Vec<CVector>]),
}

#[derive(Debug, Clone, Copy)]
pub enum ScheduleSpec<'a> {
    /// Relaxed `alpha in [0, 1]`, subject to the slot/target budgets and the
    /// motion gating of the current trajectory.
    Free,
    /// Schedule held at the given values.
    Fixed(&'a SensingSchedule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sp1Stage {
    /// Full objective including the penalty terms.
    Joint,
    /// Schedule fixed; minimizes radar power first and, at a small weight,
    /// the normalized downlink and offloading powers, which are too small in
    /// watts to be resolved next to the propulsion terms.
    Polish,
}

pub struct Sp1Setup<'a> {
    pub cfg: &'a ScenarioConfig,
    pub beam: &'a SensingBeam,
    pub traj: &'a Trajectory,
    pub expansion: &'a ExpansionPoint,
    pub schedule: ScheduleSpec<'a>,
    pub stage: Sp1Stage,
    pub shape: BeamShape<'a>,
}

const POLISH_WEIGHT: f64 = 1e-2;

#[derive(Debug, Clone)]
enum Cov {
    Full(HermVar),
    Scaled { power: VarId, shape: CMatrix },
}

impl Cov {
    fn trace_with(&self, a: &CMatrix) -> Affine {
        match self {
            Cov::Full(h) => h.trace_with(a),
            Cov::Scaled { power, shape } => Affine::term(*power, (shape * a).trace().re),
        }
    }

    fn trace(&self) -> Affine {
        match self {
            Cov::Full(h) => h.trace(),
            Cov::Scaled { power, shape } => Affine::term(*power, shape.trace().re),
        }
    }

    fn value(&self, x: &[f64]) -> CMatrix {
        match self {
            Cov::Full(h) => h.value(x),
            Cov::Scaled { power, shape } => shape * Complex64::new(x[*power].max(0.0), 0.0),
        }
    }
}

/// Big-M product of a schedule entry with a continuous quantity.
#[derive(Debug, Clone)]
enum Product<T> {
    Zero,
    Same,
    Var(T),
}

#[derive(Debug, Clone)]
enum Gate {
    Const(f64),
    Var(VarId),
}

impl Gate {
    fn expr(&self) -> Affine {
        match self {
            Gate::Const(c) => Affine::constant(*c),
            Gate::Var(v) => Affine::var(*v),
        }
    }

    fn pinned(&self) -> Option<f64> {
        match self {
            Gate::Const(c) if *c == 0.0 || *c == 1.0 => Some(*c),
            _ => None,
        }
    }
}

pub struct Sp1Program {
    pub program: ConicProgram,
    w: Vec<Vec<Cov>>,
    w_tilde: Vec<Vec<Vec<Product<Cov>>>>,
    alpha: Vec<Vec<Gate>>,
    radar: Vec<Option<VarId>>,
    radar_tilde: Vec<Vec<Product<VarId>>>,
    off: Vec<Option<VarId>>,
    off_tilde: Vec<Vec<Product<VarId>>>,
    mu: Vec<Vec<Option<VarId>>>,
    phi: Vec<Vec<Option<VarId>>>,
    sensing_only: Vec<bool>,
    scales: Scales,
}

fn check_dims(s: &Sp1Setup) -> Result<()> {
    let cfg = s.cfg;
    let (k, e, n) = (cfg.k(), cfg.e(), cfg.n_slots);
    let exp = s.expansion;
    let bad = |what: &str| Err(Error::Dimension(format!("resource subproblem: {what}")));
    if s.traj.q.len() != n + 1 || s.traj.v.len() != n {
        return bad("trajectory length");
    }
    if exp.mu_t.len() != k || exp.phi_t.len() != k || exp.mu_t.iter().chain(&exp.phi_t).any(|r| r.len() != n) {
        return bad("expansion point SINR entries");
    }
    if exp.alpha_t.len() != e || exp.alpha_t.iter().any(|r| r.len() != n) {
        return bad("expansion point schedule");
    }
    if !exp.is_finite() {
        return bad("expansion point is not finite");
    }
    if let ScheduleSpec::Fixed(sch) = s.schedule {
        if sch.alpha.len() != e || sch.alpha.iter().any(|r| r.len() != n) {
            return bad("fixed schedule");
        }
    }
    if let BeamShape::Directions(d) = s.shape {
        if d.len() != k || d.iter().any(|r| r.len() != n || r.iter().any(|v| v.len() != cfg.n_antennas)) {
            return bad("beam directions");
        }
    }
    Ok(())
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Infeasible(what.to_string()))
    }
}

/// Assembles the resource subproblem.
pub fn build_sp1(s: &Sp1Setup) -> Result<Sp1Program> {
    check_dims(s)?;
    let cfg = s.cfg;
    let (kk, ee, nn, m) = (cfg.k(), cfg.e(), cfg.n_slots, cfg.n_antennas);
    let sc = Scales::new(cfg);
    let exp = s.expansion;
    let traj = s.traj;
    let h2 = cfg.altitude * cfg.altitude;
    let hb2 = cfg.backhaul_height().powi(2);
    let inv_n = 1.0 / nn as f64;
    let mut p = ConicProgram::new();

    // ---- schedule
    let mut alpha: Vec<Vec<Gate>> = vec![Vec::with_capacity(nn); ee];
    for n in 0..nn {
        let gate_t: f64 = (0..ee).map(|e| exp.alpha_t[e][n]).sum();
        let moving = traj.v[n].norm() > HOVER_SPEED;
        for (e, row) in alpha.iter_mut().enumerate() {
            let g = match s.schedule {
                ScheduleSpec::Fixed(sch) => Gate::Const(sch.alpha[e][n]),
                ScheduleSpec::Free if moving && gate_t <= ALPHA_EPS => Gate::Const(0.0),
                ScheduleSpec::Free => {
                    let v = p.add_nonneg(format!("alpha[{e},{n}]"));
                    p.le(Affine::var(v), Affine::constant(1.0), "C11a");
                    Gate::Var(v)
                }
            };
            row.push(g);
        }
    }
    let slot_alpha: Vec<Affine> =
        (0..nn).map(|n| alpha.iter().fold(Affine::zero(), |acc, row| acc + row[n].expr())).collect();
    if let ScheduleSpec::Free = s.schedule {
        for n in 0..nn {
            if ee > 0 {
                p.le(slot_alpha[n].clone(), Affine::constant(1.0), "C6");
            }
            let gate_t: f64 = (0..ee).map(|e| exp.alpha_t[e][n]).sum();
            if traj.v[n].norm() > HOVER_SPEED && gate_t > ALPHA_EPS {
                // moving slot: the position step fixes the sensing share
                p.eq(slot_alpha[n].clone() - gate_t, "C8");
            }
        }
        for row in &alpha {
            let total = row.iter().fold(Affine::zero(), |acc, g| acc + g.expr());
            p.le(total, Affine::constant(cfg.n_s_max as f64), "C7");
        }
    }
    let slot_pinned = |n: usize| -> Option<f64> {
        let mut sum = 0.0;
        for row in &alpha {
            sum += row[n].pinned()?;
        }
        Some(sum)
    };

    // ---- downlink covariances and their products
    let mut w: Vec<Vec<Cov>> = Vec::with_capacity(kk);
    for k in 0..kk {
        let mut row = Vec::with_capacity(nn);
        for n in 0..nn {
            let c = match s.shape {
                BeamShape::Covariance => {
                    let h = p.add_herm(m, &format!("W[{k},{n}]"));
                    p.herm_psd(&h.expr(), "W psd");
                    Cov::Full(h)
                }
                BeamShape::Directions(d) => {
                    let pw = p.add_nonneg(format!("pw[{k},{n}]"));
                    Cov::Scaled { power: pw, shape: outer(&d[k][n]) }
                }
            };
            p.le(c.trace(), Affine::constant(sc.w_cap), "W cap");
            row.push(c);
        }
        w.push(row);
    }
    let mut w_tilde: Vec<Vec<Vec<Product<Cov>>>> = Vec::with_capacity(kk);
    for k in 0..kk {
        let mut per_e = Vec::with_capacity(ee);
        for (e, arow) in alpha.iter().enumerate() {
            let mut per_n = Vec::with_capacity(nn);
            for n in 0..nn {
                let prod = match arow[n].pinned() {
                    Some(a) if a == 0.0 => Product::Zero,
                    Some(_) => Product::Same,
                    None => {
                        let a = arow[n].expr();
                        let big = sc.w_cap;
                        match &w[k][n] {
                            Cov::Full(wh) => {
                                let t = p.add_herm(m, &format!("Wt[{k},{e},{n}]"));
                                let te = t.expr();
                                let we = wh.expr();
                                p.herm_psd(&HermExpr::identity_times(m, &(a.clone() * big)).minus(&te), "C17");
                                p.herm_psd(&we.minus(&te), "C18");
                                p.herm_psd(&te, "C19");
                                p.herm_psd(
                                    &te.minus(&we).plus(&HermExpr::identity_times(m, &((Affine::constant(1.0) - a) * big))),
                                    "C20",
                                );
                                Product::Var(Cov::Full(t))
                            }
                            Cov::Scaled { power, shape } => {
                                let t = p.add_nonneg(format!("pwt[{k},{e},{n}]"));
                                p.le(Affine::var(t), a.clone() * big, "C17");
                                p.le(Affine::var(t), Affine::var(*power), "C18");
                                p.nonneg(
                                    Affine::var(t) - Affine::var(*power) + (Affine::constant(1.0) - a) * big,
                                    "C20",
                                );
                                Product::Var(Cov::Scaled { power: t, shape: shape.clone() })
                            }
                        }
                    }
                };
                per_n.push(prod);
            }
            per_e.push(per_n);
        }
        w_tilde.push(per_e);
    }

    // ---- radar and offloading powers (radiated watts / normalized units)
    let mut radar = vec![None; nn];
    let mut off = vec![None; nn];
    let mut radar_tilde: Vec<Vec<Product<VarId>>> = (0..ee).map(|_| Vec::with_capacity(nn)).collect();
    let mut off_tilde: Vec<Vec<Product<VarId>>> = (0..ee).map(|_| Vec::with_capacity(nn)).collect();
    for n in 0..nn {
        let idle = slot_pinned(n) == Some(0.0);
        if ee > 0 && !idle {
            let r = p.add_nonneg(format!("r[{n}]"));
            p.le(Affine::var(r), Affine::constant(cfg.p_max), "radar cap");
            radar[n] = Some(r);
            let o = p.add_nonneg(format!("off[{n}]"));
            p.le(Affine::var(o), Affine::constant(sc.off_cap), "offload cap");
            off[n] = Some(o);
        }
        for e in 0..ee {
            let (rt, ot) = match (alpha[e][n].pinned(), radar[n], off[n]) {
                (Some(a), _, _) if a == 0.0 => (Product::Zero, Product::Zero),
                (_, None, _) | (_, _, None) => (Product::Zero, Product::Zero),
                (Some(_), Some(_), Some(_)) => (Product::Same, Product::Same),
                (None, Some(r), Some(o)) => {
                    let a = alpha[e][n].expr();
                    let one_minus = Affine::constant(1.0) - a.clone();
                    let rt = p.add_nonneg(format!("rt[{e},{n}]"));
                    p.le(Affine::var(rt), a.clone() * cfg.p_max, "C21");
                    p.le(Affine::var(rt), Affine::var(r), "C22");
                    p.nonneg(Affine::var(rt) - Affine::var(r) + one_minus.clone() * cfg.p_max, "C24");
                    let ot = p.add_nonneg(format!("ot[{e},{n}]"));
                    p.le(Affine::var(ot), a * sc.off_cap, "C13");
                    p.le(Affine::var(ot), Affine::var(o), "C14");
                    p.nonneg(Affine::var(ot) - Affine::var(o) + one_minus * sc.off_cap, "C16");
                    (Product::Var(rt), Product::Var(ot))
                }
            };
            radar_tilde[e].push(rt);
            off_tilde[e].push(ot);
        }
    }
    let product_expr = |prod: &Product<VarId>, base: Option<VarId>| -> Affine {
        match (prod, base) {
            (Product::Zero, _) | (_, None) => Affine::zero(),
            (Product::Same, Some(b)) => Affine::var(b),
            (Product::Var(v), _) => Affine::var(*v),
        }
    };

    // ---- per-user SINR surrogates and rates
    let mut mu = vec![vec![None; nn]; kk];
    let mut phi = vec![vec![None; nn]; kk];
    for k in 0..kk {
        let mut rate_sum = Affine::zero();
        for n in 0..nn {
            let gate = Affine::constant(1.0) - slot_alpha[n].clone();
            if slot_pinned(n) == Some(1.0) {
                continue;
            }
            let q = &traj.q[n];
            let a_k = outer(&cfg.steering(q, &cfg.users[k]));
            let (mu_t, phi_t) = (exp.mu_t[k][n], exp.phi_t[k][n]);
            // may go negative: a slot can opt out of serving the user, the log
            // cone still keeps 1 + mu > 0
            let mv = p.add_var(format!("mu[{k},{n}]"));
            let fv = p.add_nonneg(format!("phi[{k},{n}]"));
            let rhs = w[k][n].trace_with(&a_k) + Affine::term(mv, mu_t) + Affine::term(fv, phi_t)
                - 0.5 * (mu_t * mu_t + phi_t * phi_t);
            p.quad_le(vec![(0.5, Affine::var(mv) + Affine::var(fv))], rhs, "C2a");
            let mut interference = Affine::constant(cfg.dist_sq(q, &cfg.users[k]) / h2);
            for (i, wi) in w.iter().enumerate() {
                if i != k {
                    interference += wi[n].trace_with(&a_k);
                }
            }
            p.le(interference, Affine::var(fv), "C2b");
            let t = p.add_var(format!("t[{k},{n}]"));
            p.log_ge(Affine::var(mv) + 1.0, Affine::var(t), "C2c log");
            p.le(Affine::constant(-1.0), Affine::var(t), "C2c floor");
            p.le(Affine::var(t), gate * sc.rate_cap, "C2c gate");
            rate_sum += Affine::var(t);
            mu[k][n] = Some(mv);
            phi[k][n] = Some(fv);
        }
        let need = cfg.r_min_rate[k] * (1.0 + FEAS_MARGIN);
        if need > 0.0 {
            require(!rate_sum.terms.is_empty(), "rate demand with every slot spent sensing")?;
            p.le(Affine::constant(need), rate_sum * (inv_n / LN_2), "C2c");
        }
    }

    // ---- sensing SNR, offloading and feed links, power budget
    for e in 0..ee {
        if cfg.snr_th[e] <= 0.0 {
            continue;
        }
        let mut snr = Affine::zero();
        for n in 0..nn {
            let rt = product_expr(&radar_tilde[e][n], radar[n]);
            if rt.terms.is_empty() {
                continue;
            }
            let c = snr_per_radiated_watt(cfg.dist_sq(&traj.q[n], &cfg.targets[e]), cfg.rcs[e], s.beam.design_gain, cfg);
            snr += rt * (c / cfg.snr_th[e]);
        }
        require(!snr.terms.is_empty(), &format!("target {e} has no slot that can sense it"))?;
        p.le(Affine::constant(1.0 + FEAS_MARGIN), snr, "C3");
    }
    let stream = cfg.iota * cfg.production_rate() * LN_2 * (1.0 + FEAS_MARGIN);
    for n in 0..nn {
        let q = &traj.q[n];
        let g = hb2 / ((q - cfg.bs_pos).norm_squared() + hb2);
        for e in 0..ee {
            if alpha[e][n].pinned() == Some(0.0) || off[n].is_none() {
                continue;
            }
            let ot = product_expr(&off_tilde[e][n], off[n]);
            p.log_ge(ot * g + 1.0, alpha[e][n].expr() * stream, "C4");
        }
        let gb = cfg.backhaul_gain(q);
        let feed = (1.0 + cfg.p_bs * gb * gb / cfg.sigma2_u).log2();
        let demand = cfg.total_min_rate();
        if feed < demand {
            let floor = (1.0 - feed / demand) * (1.0 + FEAS_MARGIN);
            match slot_pinned(n) {
                Some(sum) => require(sum >= floor, &format!("BS feed link short in slot {n}"))?,
                None => p.le(Affine::constant(floor), slot_alpha[n].clone(), "C5"),
            }
        }
        let mut budget = Affine::zero();
        for k in 0..kk {
            budget += w[k][n].trace() * sc.w;
            for e in 0..ee {
                match &w_tilde[k][e][n] {
                    Product::Zero => {}
                    Product::Same => budget += w[k][n].trace() * (-sc.w),
                    Product::Var(c) => budget += c.trace() * (-sc.w),
                }
            }
        }
        for e in 0..ee {
            budget += product_expr(&radar_tilde[e][n], radar[n]);
            budget += product_expr(&off_tilde[e][n], off[n]) * sc.off;
        }
        p.le(budget, Affine::constant(cfg.p_max * (1.0 - FEAS_MARGIN)), "C1");
    }

    // ---- objective
    let mut obj = Affine::zero();
    match s.stage {
        Sp1Stage::Joint => {
            let hover = p_hover(&cfg.aero);
            let loc = cfg.local_power();
            for n in 0..nn {
                for k in 0..kk {
                    obj += w[k][n].trace() * (cfg.eta * sc.w * inv_n);
                }
                if let Some(r) = radar[n] {
                    obj += Affine::term(r, cfg.eta * inv_n);
                }
                let sense_cost = hover - p_fly(&traj.v[n], &cfg.aero) + loc;
                for e in 0..ee {
                    obj += product_expr(&off_tilde[e][n], off[n]) * (sc.off * inv_n);
                    let a = alpha[e][n].expr();
                    let at = exp.alpha_t[e][n];
                    obj += a.clone() * (sense_cost * inv_n);
                    // linear majorizer of alpha - alpha^2
                    obj += a.clone() * (cfg.solver.tau1 * (1.0 - 2.0 * at)) + cfg.solver.tau1 * at * at;
                    obj += a * (cfg.solver.tau2 * (traj.q[n] - cfg.targets[e]).norm_squared());
                }
            }
        }
        Sp1Stage::Polish => {
            for n in 0..nn {
                if let Some(r) = radar[n] {
                    obj += Affine::term(r, cfg.eta * inv_n);
                }
                if let Some(o) = off[n] {
                    obj += Affine::term(o, POLISH_WEIGHT * inv_n);
                }
                for k in 0..kk {
                    obj += w[k][n].trace() * (POLISH_WEIGHT * inv_n);
                }
                for e in 0..ee {
                    obj += product_expr(&off_tilde[e][n], off[n]) * (POLISH_WEIGHT * inv_n);
                }
            }
        }
    }
    p.minimize(obj);

    let sensing_only = (0..nn).map(|n| slot_pinned(n) == Some(1.0)).collect();
    Ok(Sp1Program { program: p, w, w_tilde, alpha, radar, radar_tilde, off, off_tilde, mu, phi, sensing_only, scales: sc })
}

fn snap(a: f64) -> f64 {
    if a < ALPHA_SNAP {
        0.0
    } else if a > 1.0 - ALPHA_SNAP {
        1.0
    } else {
        a
    }
}

impl Sp1Program {
    /// Reads the schedule and the physical resource allocation back from a
    /// primal solution vector.
    pub fn extract(&self, x: &[f64], cfg: &ScenarioConfig) -> (SensingSchedule, RAState) {
        let (kk, ee, nn) = (cfg.k(), cfg.e(), cfg.n_slots);
        let sc = &self.scales;
        let duty = cfg.duty();
        let mut sched = SensingSchedule::zeros(ee, nn);
        for e in 0..ee {
            for n in 0..nn {
                sched.alpha[e][n] = match &self.alpha[e][n] {
                    Gate::Const(c) => *c,
                    Gate::Var(v) => snap(x[*v].clamp(0.0, 1.0)),
                };
            }
        }
        let mut st = RAState::zeros(cfg);
        let to_watts = Complex64::new(sc.w, 0.0);
        let clean = |c: CMatrix| project_psd(&hermitize(&c)) * to_watts;
        for k in 0..kk {
            for n in 0..nn {
                if self.sensing_only[n] {
                    // no downlink share in this slot; the covariance is free
                    // and carries only solver noise
                    continue;
                }
                st.w[k][n] = clean(self.w[k][n].value(x));
                for e in 0..ee {
                    st.w_tilde[k][e][n] = match &self.w_tilde[k][e][n] {
                        Product::Zero => st.w_tilde[k][e][n].clone(),
                        Product::Same => st.w[k][n].clone(),
                        Product::Var(c) => clean(c.value(x)),
                    };
                }
                if let (Some(mv), Some(fv)) = (self.mu[k][n], self.phi[k][n]) {
                    st.mu[k][n] = x[mv].max(0.0);
                    st.phi[k][n] = x[fv].max(0.0);
                }
            }
        }
        for n in 0..nn {
            let r = self.radar[n].map_or(0.0, |v| x[v].max(0.0));
            let o = self.off[n].map_or(0.0, |v| x[v].max(0.0));
            st.p_rad[n] = r / duty;
            st.p_off[n] = o * sc.off;
            for e in 0..ee {
                let (rt, ot) = match (&self.radar_tilde[e][n], &self.off_tilde[e][n]) {
                    (Product::Var(a), Product::Var(b)) => (x[*a].max(0.0), x[*b].max(0.0)),
                    (Product::Same, _) => (r, o),
                    _ => (0.0, 0.0),
                };
                st.p_rad_tilde[e][n] = rt / duty;
                st.p_off_tilde[e][n] = ot * sc.off;
            }
        }
        (sched, st)
    }
}

#[derive(Debug, Clone)]
pub struct Sp1Result {
    pub schedule: SensingSchedule,
    pub state: RAState,
    pub status: ConicStatus,
    pub objective: f64,
    pub solve_time: f64,
    pub iterations: u32,
}

/// Builds and solves one resource subproblem.
pub fn solve_sp1(setup: &Sp1Setup, settings: &ConicSettings) -> Result<Sp1Result> {
    let prog = build_sp1(setup)?;
    let what = match setup.stage {
        Sp1Stage::Joint => "resource subproblem",
        Sp1Stage::Polish => "resource polish",
    };
    let sol = solve_checked(&prog.program, settings, what)?;
    let (schedule, state) = prog.extract(&sol.x, setup.cfg);
    Ok(Sp1Result { schedule, state, status: sol.status, objective: sol.objective, solve_time: sol.solve_time, iterations: sol.iterations })
}
