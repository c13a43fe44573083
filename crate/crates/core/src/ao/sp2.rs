//! Trajectory subproblem for a fixed resource allocation and schedule.
//!
//! Positions enter the rate constraints through the array response; the
//! pairwise part of `a^H W a` is bounded by its tangent plane plus or minus
//! a curvature term so each side stays conservative. Sensing, offloading
//! and BS-feed requirements become distance balls around the relevant
//! ground points. The induced-power term uses the usual auxiliary `y` with
//! the tangent lower bound of `y^2 + |v|^2 / v0^2`.

use std::f64::consts::LN_2;

use crate::ao::{Scales, ALPHA_EPS, FEAS_MARGIN};
use crate::conic::{solve_checked, Affine, ConicProgram, ConicSettings, ConicStatus, VarId};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::power::{p_hover, FlightModel};
use crate::scenario::{ScenarioConfig, Vec2};
use crate::state::{RAState, SensingSchedule, Trajectory};
use crate::surrogates::{pair_curvature_bound, pair_decomposition, pair_gradient, ArrayGeometry, ExpansionPoint};

/// Where the interior positions may go.
#[derive(Debug, Clone, Copy)]
pub enum PathConstraint<'a> {
    Free,
    /// Position `n` stays on segment `n` (degenerate segments pin it).
    Segments(&'a [(Vec2, Vec2)]),
}

pub struct Sp2Setup<'a> {
    pub cfg: &'a ScenarioConfig,
    pub state: &'a RAState,
    pub schedule: &'a SensingSchedule,
    pub expansion: &'a ExpansionPoint,
    pub path: PathConstraint<'a>,
    /// Enforce the acceleration limit between consecutive slots.
    pub accel_limit: bool,
}

/// Slots whose sensing share reaches this are treated as full hover.
const FULL_HOVER: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone)]
struct Point {
    x: Affine,
    y: Affine,
}

impl Point {
    fn fixed(p: &Vec2) -> Self {
        Point { x: Affine::constant(p.x), y: Affine::constant(p.y) }
    }

    fn minus(&self, p: &Vec2) -> [Affine; 2] {
        [self.x.clone() - p.x, self.y.clone() - p.y]
    }

    fn is_fixed(&self) -> bool {
        self.x.terms.is_empty() && self.y.terms.is_empty()
    }

    fn value(&self, sol: &[f64]) -> Vec2 {
        Vec2::new(self.x.eval(sol), self.y.eval(sol))
    }

    fn linear(&self, g: &Vec2) -> Affine {
        self.x.clone() * g.x + self.y.clone() * g.y
    }
}

pub struct Sp2Program {
    pub program: ConicProgram,
    q: Vec<Point>,
    v: Vec<Option<(VarId, VarId)>>,
}

impl Sp2Program {
    pub fn extract(&self, x: &[f64]) -> Trajectory {
        Trajectory {
            q: self.q.iter().map(|p| p.value(x)).collect(),
            v: self.v.iter().map(|v| v.map_or(Vec2::zeros(), |(a, b)| Vec2::new(x[a], x[b]))).collect(),
        }
    }
}

fn check_dims(s: &Sp2Setup) -> Result<()> {
    let cfg = s.cfg;
    let (k, e, n) = (cfg.k(), cfg.e(), cfg.n_slots);
    let bad = |what: &str| Err(Error::Dimension(format!("trajectory subproblem: {what}")));
    let exp = s.expansion;
    if exp.q_t.len() != n + 1 || exp.v_t.len() != n || exp.y_t.len() != n {
        return bad("expansion trajectory");
    }
    if exp.mu_prime_t.len() != k || exp.beta_t.len() != k || exp.mu_prime_t.iter().chain(&exp.beta_t).any(|r| r.len() != n) {
        return bad("expansion SINR entries");
    }
    if !exp.is_finite() {
        return bad("expansion point is not finite");
    }
    if s.schedule.alpha.len() != e || s.schedule.alpha.iter().any(|r| r.len() != n) {
        return bad("schedule");
    }
    if s.state.w.len() != k || s.state.p_off_tilde.len() != e || s.state.p_rad.len() != n {
        return bad("resource state");
    }
    if let PathConstraint::Segments(seg) = s.path {
        if seg.len() != n {
            return bad("path segments");
        }
    }
    Ok(())
}

/// Assembles the trajectory subproblem.
pub fn build_sp2(s: &Sp2Setup) -> Result<Sp2Program> {
    check_dims(s)?;
    let cfg = s.cfg;
    let (kk, ee, nn) = (cfg.k(), cfg.e(), cfg.n_slots);
    let sc = Scales::new(cfg);
    let exp = s.expansion;
    let sched = s.schedule;
    let geo = ArrayGeometry::from_config(cfg);
    let h2 = cfg.altitude * cfg.altitude;
    let hb2 = cfg.backhaul_height().powi(2);
    let inv_n = 1.0 / nn as f64;
    let dt = cfg.delta_t;
    let aero = &cfg.aero;
    let mut p = ConicProgram::new();

    // ---- positions
    let mut q: Vec<Point> = Vec::with_capacity(nn + 1);
    q.push(Point::fixed(&cfg.q_start));
    for n in 1..nn {
        let pt = match s.path {
            PathConstraint::Free => {
                let x = p.add_var(format!("qx[{n}]"));
                let y = p.add_var(format!("qy[{n}]"));
                Point { x: Affine::var(x), y: Affine::var(y) }
            }
            PathConstraint::Segments(seg) => {
                let (a, b) = seg[n];
                if (b - a).norm() <= 1e-12 {
                    Point::fixed(&a)
                } else {
                    let l = p.add_nonneg(format!("lambda[{n}]"));
                    p.le(Affine::var(l), Affine::constant(1.0), "segment");
                    let d = b - a;
                    Point { x: Affine::term(l, d.x) + a.x, y: Affine::term(l, d.y) + a.y }
                }
            }
        };
        q.push(pt);
    }
    q.push(Point::fixed(&cfg.q_final));

    // ---- velocities, kinematics and flight power
    let gate: Vec<f64> = (0..nn).map(|n| 1.0 - sched.slot_sum(n)).collect();
    let mut v: Vec<Option<(VarId, VarId)>> = Vec::with_capacity(nn);
    let mut obj = Affine::zero();
    let hover = p_hover(aero);
    for n in 0..nn {
        let g = gate[n];
        obj += Affine::constant((1.0 - g) * hover * inv_n);
        if 1.0 - g >= FULL_HOVER {
            v.push(None);
            let [dx, dy] = [q[n + 1].x.clone() - q[n].x.clone(), q[n + 1].y.clone() - q[n].y.clone()];
            p.eq(dx, "C8 x");
            p.eq(dy, "C8 y");
            continue;
        }
        let vx = p.add_var(format!("vx[{n}]"));
        let vy = p.add_var(format!("vy[{n}]"));
        v.push(Some((vx, vy)));
        let step = g * dt;
        p.eq(q[n + 1].x.clone() - q[n].x.clone() - Affine::term(vx, step), "C8 x");
        p.eq(q[n + 1].y.clone() - q[n].y.clone() - Affine::term(vy, step), "C8 y");
        p.soc(Affine::constant(g * cfg.v_max), vec![Affine::var(vx), Affine::var(vy)], "C10");

        // flight power epigraph
        let y = p.add_nonneg(format!("y[{n}]"));
        let zinv = p.add_nonneg(format!("zinv[{n}]"));
        let u = p.add_nonneg(format!("speed[{n}]"));
        let sq = p.add_nonneg(format!("speed2[{n}]"));
        let cube = p.add_nonneg(format!("speed3[{n}]"));
        p.rotated_soc(Affine::var(y), Affine::var(zinv), vec![Affine::constant(1.0)], "y zinv");
        let (yt, vt) = (exp.y_t[n], exp.v_t[n]);
        let v0s = aero.v0 * aero.v0;
        let lower = Affine::term(y, 2.0 * yt)
            + Affine::term(vx, 2.0 * vt.x / v0s)
            + Affine::term(vy, 2.0 * vt.y / v0s)
            + (-(yt * yt) - vt.norm_squared() / v0s);
        p.rotated_soc(lower, Affine::constant(1.0), vec![Affine::var(zinv)], "C26");
        p.soc(Affine::var(u), vec![Affine::var(vx), Affine::var(vy)], "speed");
        p.rotated_soc(Affine::var(sq), Affine::constant(1.0), vec![Affine::var(u)], "speed^2");
        p.rotated_soc(Affine::var(cube), Affine::var(u), vec![Affine::var(sq)], "speed^3");
        let mut fly = Affine::term(sq, aero.profile_coeff()) + Affine::term(cube, aero.drag_coeff());
        fly += match aero.model_mode {
            FlightModel::Standard => Affine::term(y, aero.p_i) + aero.p_o,
            FlightModel::PaperLiteral => Affine::term(y, aero.p_i) - aero.p_i,
        };
        obj += fly * (g * inv_n);
    }
    if s.accel_limit {
        for n in 0..nn.saturating_sub(1) {
            let a = v[n].map_or([Affine::zero(), Affine::zero()], |(x, y)| [Affine::var(x), Affine::var(y)]);
            let b = v[n + 1].map_or([Affine::zero(), Affine::zero()], |(x, y)| [Affine::var(x), Affine::var(y)]);
            let [ax, ay] = a;
            let [bx, by] = b;
            p.soc(Affine::constant(cfg.a_max * dt), vec![bx - ax, by - ay], "C9");
        }
    }

    // ---- downlink rates
    let w_hat: Vec<Vec<CMatrix>> = s
        .state
        .w
        .iter()
        .map(|row| row.iter().map(|w| w.map(|z| z / sc.w)).collect())
        .collect();
    for k in 0..kk {
        let need = cfg.r_min_rate[k] * (1.0 + FEAS_MARGIN);
        if need <= 0.0 {
            continue;
        }
        let uk = cfg.users[k];
        let mut rate_sum = Affine::zero();
        for n in 0..nn {
            if gate[n] <= 1.0 - FULL_HOVER || w_hat[k][n].trace().re <= 1e-14 {
                continue;
            }
            let qt = exp.q_t[n];
            let (mu_t, beta_t) = (exp.mu_prime_t[k][n], exp.beta_t[k][n]);
            // may go negative: a slot can opt out of serving the user, the log
            // cone still keeps 1 + mu > 0
            let mv = p.add_var(format!("mu'[{k},{n}]"));
            let bv = p.add_nonneg(format!("beta[{k},{n}]"));
            let [dx, dy] = q[n].minus(&qt);

            let (u_own, j_own) = pair_decomposition(&w_hat[k][n], &qt, &uk, &geo);
            let g_own = pair_gradient(&w_hat[k][n], &qt, &uk, &geo);
            let l_own = pair_curvature_bound(&w_hat[k][n], &geo);
            let rhs = q[n].linear(&g_own) + (u_own + j_own - g_own.dot(&qt))
                + Affine::term(mv, mu_t)
                + Affine::term(bv, beta_t)
                - 0.5 * (mu_t * mu_t + beta_t * beta_t);
            p.quad_le(
                vec![(0.5, Affine::var(mv) + Affine::var(bv)), (0.5 * l_own, dx.clone()), (0.5 * l_own, dy.clone())],
                rhs,
                "C2a",
            );

            let mut lin = Affine::zero();
            let mut curv = 0.0;
            for (i, wi) in w_hat.iter().enumerate() {
                if i == k {
                    continue;
                }
                let (ui, ji) = pair_decomposition(&wi[n], &qt, &uk, &geo);
                let gi = pair_gradient(&wi[n], &qt, &uk, &geo);
                lin += q[n].linear(&gi) + (ui + ji - gi.dot(&qt));
                curv += 0.5 * pair_curvature_bound(&wi[n], &geo);
            }
            let [ux, uy] = q[n].minus(&uk);
            p.quad_le(
                vec![(curv, dx), (curv, dy), (1.0 / h2, ux), (1.0 / h2, uy)],
                Affine::var(bv) - lin - 1.0,
                "C2b",
            );

            let t = p.add_var(format!("t[{k},{n}]"));
            p.log_ge(Affine::var(mv) + 1.0, Affine::var(t), "C2c log");
            p.le(Affine::constant(-1.0), Affine::var(t), "C2c floor");
            p.le(Affine::var(t), Affine::constant(gate[n] * sc.rate_cap), "C2c gate");
            rate_sum += Affine::var(t);
        }
        if rate_sum.terms.is_empty() {
            return Err(Error::Infeasible(format!("user {k} has a rate demand but no serving slot")));
        }
        p.le(Affine::constant(need), rate_sum * (inv_n / LN_2), "C2c");
    }

    // ---- sensing balls, backhaul balls, hover penalty
    let stream = cfg.iota * cfg.production_rate();
    let feed_scale = cfg.p_bs * cfg.beta0_sq() * cfg.g_t / cfg.sigma2_u;
    let demand = cfg.total_min_rate();
    for n in 0..nn {
        if q[n].is_fixed() {
            continue;
        }
        let qt = exp.q_t[n];
        for e in 0..ee {
            let a = sched.alpha[e][n];
            if a <= ALPHA_EPS {
                continue;
            }
            let d = cfg.targets[e];
            if s.state.p_rad_tilde[e][n] * cfg.duty() > 1e-10 * cfg.p_max && cfg.snr_th[e] > 0.0 {
                let r = (qt - d).norm().max(1e-7);
                p.soc(Affine::constant(r), q[n].minus(&d).to_vec(), "C3 ball");
            }
            let need = 2f64.powf(a * stream) - 1.0;
            if need > 0.0 {
                let p_hat = s.state.p_off_tilde[e][n] / sc.off;
                let r2 = (p_hat * hb2 / need - hb2).max((qt - cfg.bs_pos).norm_squared());
                p.soc(Affine::constant(r2.sqrt()), q[n].minus(&cfg.bs_pos).to_vec(), "C4 ball");
            }
            let h = p.add_nonneg(format!("hover[{e},{n}]"));
            p.rotated_soc(Affine::var(h), Affine::constant(1.0), q[n].minus(&d).to_vec(), "hover gap");
            obj += Affine::term(h, cfg.solver.tau2 * a);
        }
        if gate[n] > 1.0 - FULL_HOVER && demand > 0.0 {
            let need = 2f64.powf(demand * gate[n]) - 1.0;
            let r2 = (feed_scale / need - hb2).max((qt - cfg.bs_pos).norm_squared());
            p.soc(Affine::constant(r2.sqrt()), q[n].minus(&cfg.bs_pos).to_vec(), "C5 ball");
        }
    }
    for n in 0..nn {
        if q[n].is_fixed() {
            let pos = q[n].value(&[]);
            for e in 0..ee {
                obj += Affine::constant(cfg.solver.tau2 * sched.alpha[e][n] * (pos - cfg.targets[e]).norm_squared());
            }
        }
    }
    p.minimize(obj);
    Ok(Sp2Program { program: p, q, v })
}

#[derive(Debug, Clone)]
pub struct Sp2Result {
    pub trajectory: Trajectory,
    pub status: ConicStatus,
    pub objective: f64,
    pub solve_time: f64,
    pub iterations: u32,
}

pub fn solve_sp2(setup: &Sp2Setup, settings: &ConicSettings) -> Result<Sp2Result> {
    let prog = build_sp2(setup)?;
    let sol = solve_checked(&prog.program, settings, "trajectory subproblem")?;
    Ok(Sp2Result {
        trajectory: prog.extract(&sol.x),
        status: sol.status,
        objective: sol.objective,
        solve_time: sol.solve_time,
        iterations: sol.iterations,
    })
}
