//! Solver-agnostic conic program and its adapter to Clarabel.
//!
//! A [`ConicProgram`] is a linear objective over scalar variables plus a list
//! of cone memberships `expr ∈ K`, where each `expr` is a vector of sparse
//! affine forms. Supported cones: zero, nonnegative orthant, second-order
//! cone, exponential cone, and the PSD cone of real symmetric matrices.
//! Hermitian matrix variables are stored through their real/imaginary parts
//! and constrained PSD through the real `2M x 2M` embedding.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

pub type VarId = usize;

/// Sparse affine form `constant + sum coeff * x[var]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn zero() -> Self {
        Affine::default()
    }

    pub fn constant(c: f64) -> Self {
        Affine { terms: Vec::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        Affine { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn term(v: VarId, c: f64) -> Self {
        Affine { terms: vec![(v, c)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: VarId, c: f64) {
        if c != 0.0 {
            self.terms.push((v, c));
        }
    }

    pub fn scale(mut self, c: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= c;
        }
        self.constant *= c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * x[*v]).sum::<f64>()
    }

    /// Merges duplicate variables and drops zero coefficients.
    pub fn compact(&self) -> Affine {
        let mut map: BTreeMap<VarId, f64> = BTreeMap::new();
        for (v, c) in &self.terms {
            *map.entry(*v).or_insert(0.0) += c;
        }
        Affine {
            terms: map.into_iter().filter(|(_, c)| *c != 0.0).collect(),
            constant: self.constant,
        }
    }
}

impl From<f64> for Affine {
    fn from(c: f64) -> Self {
        Affine::constant(c)
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(mut self, rhs: Affine) -> Affine {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl Add<f64> for Affine {
    type Output = Affine;
    fn add(mut self, rhs: f64) -> Affine {
        self.constant += rhs;
        self
    }
}

impl AddAssign for Affine {
    fn add_assign(&mut self, rhs: Affine) {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(self, rhs: Affine) -> Affine {
        self + rhs.scale(-1.0)
    }
}

impl Sub<f64> for Affine {
    type Output = Affine;
    fn sub(mut self, rhs: f64) -> Affine {
        self.constant -= rhs;
        self
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Affine {
    type Output = Affine;
    fn mul(self, rhs: f64) -> Affine {
        self.scale(rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Zero,
    NonNeg,
    /// `‖x[1..]‖ ≤ x[0]`.
    Soc,
    /// `x[1] exp(x[0]/x[1]) ≤ x[2]`, `x[1] > 0`.
    Exp,
    /// Real symmetric `n x n` matrix in upper-triangular column-major order
    /// (unscaled; the adapter applies the `sqrt(2)` factors).
    Psd(usize),
}

#[derive(Debug, Clone)]
pub struct ConeConstraint {
    pub kind: ConeKind,
    pub exprs: Vec<Affine>,
    pub label: String,
}

/// Hermitian `m x m` matrix variable: real part symmetric, imaginary part
/// antisymmetric, `m^2` scalars in total.
#[derive(Debug, Clone)]
pub struct HermVar {
    pub m: usize,
    re: Vec<VarId>,
    im: Vec<VarId>,
}

fn tri_index(i: usize, j: usize) -> usize {
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    c * (c + 1) / 2 + r
}

fn strict_index(i: usize, j: usize) -> usize {
    let (r, c) = if i < j { (i, j) } else { (j, i) };
    c * (c - 1) / 2 + r
}

impl HermVar {
    pub fn re(&self, i: usize, j: usize) -> Affine {
        Affine::var(self.re[tri_index(i, j)])
    }

    pub fn im(&self, i: usize, j: usize) -> Affine {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => Affine::zero(),
            std::cmp::Ordering::Less => Affine::var(self.im[strict_index(i, j)]),
            std::cmp::Ordering::Greater => Affine::term(self.im[strict_index(i, j)], -1.0),
        }
    }

    pub fn expr(&self) -> HermExpr {
        HermExpr::from_fn(self.m, |i, j| (self.re(i, j), self.im(i, j)))
    }

    /// `Tr(W A)` for a fixed Hermitian `A`.
    pub fn trace_with(&self, a: &CMatrix) -> Affine {
        let mut out = Affine::zero();
        for i in 0..self.m {
            for j in 0..self.m {
                let z = a[(j, i)];
                // Tr(WA) = sum_ij W_ij A_ji, real part of (X + iY)_ij (A_ji)
                //        = X_ij Re A_ji - Y_ij Im A_ji
                out += self.re(i, j) * z.re;
                if i != j {
                    out += self.im(i, j) * (-z.im);
                }
            }
        }
        out.compact()
    }

    pub fn trace(&self) -> Affine {
        let mut out = Affine::zero();
        for i in 0..self.m {
            out += self.re(i, i);
        }
        out
    }

    pub fn value(&self, x: &[f64]) -> CMatrix {
        CMatrix::from_fn(self.m, self.m, |i, j| {
            num_complex::Complex64::new(self.re(i, j).eval(x), self.im(i, j).eval(x))
        })
    }
}

/// Hermitian matrix of affine forms, stored as `(real, imag)` parts.
#[derive(Debug, Clone)]
pub struct HermExpr {
    pub m: usize,
    pub entries: Vec<(Affine, Affine)>,
}

impl HermExpr {
    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> (Affine, Affine)) -> Self {
        let mut entries = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                entries.push(f(i, j));
            }
        }
        HermExpr { m, entries }
    }

    /// `c * A` for a fixed Hermitian `A` and a scalar affine `c`.
    pub fn scaled_const(a: &CMatrix, c: &Affine) -> Self {
        HermExpr::from_fn(a.nrows(), |i, j| (c.clone() * a[(i, j)].re, c.clone() * a[(i, j)].im))
    }

    pub fn identity_times(m: usize, c: &Affine) -> Self {
        HermExpr::from_fn(m, |i, j| {
            if i == j {
                (c.clone(), Affine::zero())
            } else {
                (Affine::zero(), Affine::zero())
            }
        })
    }

    pub fn get(&self, i: usize, j: usize) -> &(Affine, Affine) {
        &self.entries[i * self.m + j]
    }

    pub fn combine(&self, other: &HermExpr, sign: f64) -> HermExpr {
        HermExpr::from_fn(self.m, |i, j| {
            let (a, b) = self.get(i, j);
            let (c, d) = other.get(i, j);
            (a.clone() + c.clone() * sign, b.clone() + d.clone() * sign)
        })
    }

    pub fn plus(&self, other: &HermExpr) -> HermExpr {
        self.combine(other, 1.0)
    }

    pub fn minus(&self, other: &HermExpr) -> HermExpr {
        self.combine(other, -1.0)
    }

    /// Real `2m x 2m` symmetric embedding `[[Re, -Im], [Im, Re]]`.
    pub fn embedding(&self) -> Vec<Vec<Affine>> {
        let m = self.m;
        let mut out = vec![vec![Affine::zero(); 2 * m]; 2 * m];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                let (re, im) = self.get(i % m, j % m);
                *slot = match (i < m, j < m) {
                    (true, true) | (false, false) => re.clone(),
                    (true, false) => -im.clone(),
                    (false, true) => im.clone(),
                };
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    pub names: Vec<String>,
    pub objective: Affine,
    pub constraints: Vec<ConeConstraint>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> VarId {
        self.names.push(name.into());
        self.names.len() - 1
    }

    /// Scalar variable constrained to be nonnegative.
    pub fn add_nonneg(&mut self, name: impl Into<String>) -> VarId {
        let name = name.into();
        let v = self.add_var(name.clone());
        self.nonneg(Affine::var(v), name);
        v
    }

    pub fn add_herm(&mut self, m: usize, name: &str) -> HermVar {
        let re = (0..m * (m + 1) / 2).map(|i| self.add_var(format!("{name}.re{i}"))).collect();
        let im = (0..m * m.saturating_sub(1) / 2)
            .map(|i| self.add_var(format!("{name}.im{i}")))
            .collect();
        HermVar { m, re, im }
    }

    pub fn minimize(&mut self, obj: Affine) {
        self.objective = obj;
    }

    fn push(&mut self, kind: ConeKind, exprs: Vec<Affine>, label: impl Into<String>) {
        self.constraints.push(ConeConstraint { kind, exprs, label: label.into() });
    }

    /// `expr = 0`.
    pub fn eq(&mut self, expr: Affine, label: impl Into<String>) {
        self.push(ConeKind::Zero, vec![expr], label);
    }

    /// `expr ≥ 0`.
    pub fn nonneg(&mut self, expr: Affine, label: impl Into<String>) {
        self.push(ConeKind::NonNeg, vec![expr], label);
    }

    /// `lhs ≤ rhs`.
    pub fn le(&mut self, lhs: Affine, rhs: Affine, label: impl Into<String>) {
        self.nonneg(rhs - lhs, label);
    }

    /// `‖xs‖₂ ≤ t`.
    pub fn soc(&mut self, t: Affine, xs: Vec<Affine>, label: impl Into<String>) {
        let mut exprs = vec![t];
        exprs.extend(xs);
        self.push(ConeKind::Soc, exprs, label);
    }

    /// `‖u‖² ≤ y z` with `y, z ≥ 0` (rotated second-order cone).
    pub fn rotated_soc(&mut self, y: Affine, z: Affine, u: Vec<Affine>, label: impl Into<String>) {
        let mut xs: Vec<Affine> = u.into_iter().map(|a| a * 2.0).collect();
        xs.push(y.clone() - z.clone());
        self.soc(y + z, xs, label);
    }

    /// `sum c_i u_i² ≤ rhs` for nonnegative weights `c_i`.
    pub fn quad_le(&mut self, terms: Vec<(f64, Affine)>, rhs: Affine, label: impl Into<String>) {
        let u: Vec<Affine> = terms.into_iter().map(|(c, a)| a * c.sqrt()).collect();
        self.rotated_soc(rhs, Affine::constant(1.0), u, label);
    }

    /// `t ≤ ln(u)`.
    pub fn log_ge(&mut self, u: Affine, t: Affine, label: impl Into<String>) {
        self.push(ConeKind::Exp, vec![t, Affine::constant(1.0), u], label);
    }

    /// Real symmetric matrix (given in full; only the upper triangle is read)
    /// constrained PSD.
    pub fn psd(&mut self, mat: Vec<Vec<Affine>>, label: impl Into<String>) {
        let n = mat.len();
        let mut exprs = Vec::with_capacity(n * (n + 1) / 2);
        for (j, _) in mat.iter().enumerate() {
            for row in mat.iter().take(j + 1) {
                exprs.push(row[j].clone());
            }
        }
        self.push(ConeKind::Psd(n), exprs, label);
    }

    pub fn herm_psd(&mut self, h: &HermExpr, label: impl Into<String>) {
        if h.m == 1 {
            self.nonneg(h.get(0, 0).0.clone(), label);
        } else {
            self.psd(h.embedding(), label);
        }
    }

    pub fn n_rows(&self) -> usize {
        self.constraints.iter().map(|c| c.exprs.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicStatus {
    Optimal,
    Inaccurate,
    Infeasible,
    Failure,
}

impl fmt::Display for ConicStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConicStatus::Optimal => "optimal",
            ConicStatus::Inaccurate => "inaccurate",
            ConicStatus::Infeasible => "infeasible",
            ConicStatus::Failure => "failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: ConicStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
    pub solve_time: f64,
    pub raw_status: String,
}

impl ConicSolution {
    pub fn value(&self, a: &Affine) -> f64 {
        a.eval(&self.x)
    }

    pub fn usable(&self) -> bool {
        matches!(self.status, ConicStatus::Optimal | ConicStatus::Inaccurate)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConicSettings {
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for ConicSettings {
    fn default() -> Self {
        ConicSettings { tol: 1e-8, max_iter: 400 }
    }
}

/// Largest cone violation of `x`, per constraint label (for diagnostics).
pub fn constraint_residuals(prog: &ConicProgram, x: &[f64]) -> Vec<(String, f64)> {
    prog.constraints
        .iter()
        .map(|c| {
            let v: Vec<f64> = c.exprs.iter().map(|e| e.eval(x)).collect();
            let r = match c.kind {
                ConeKind::Zero => v[0].abs(),
                ConeKind::NonNeg => (-v[0]).max(0.0),
                ConeKind::Soc => {
                    let n = v[1..].iter().map(|a| a * a).sum::<f64>().sqrt();
                    (n - v[0]).max(0.0)
                }
                ConeKind::Exp => {
                    let (a, b, c) = (v[0], v[1], v[2]);
                    if b > 0.0 && c > 0.0 {
                        (a - b * (c / b).ln()).max(0.0)
                    } else {
                        f64::INFINITY
                    }
                }
                ConeKind::Psd(n) => {
                    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
                    let mut idx = 0;
                    for j in 0..n {
                        for i in 0..=j {
                            m[(i, j)] = v[idx];
                            m[(j, i)] = v[idx];
                            idx += 1;
                        }
                    }
                    let ev = nalgebra::SymmetricEigen::new(m).eigenvalues;
                    (-ev.iter().copied().fold(f64::INFINITY, f64::min)).max(0.0)
                }
            };
            (c.label.clone(), r)
        })
        .collect()
}

/// Solves the program with Clarabel. `Solved` maps to optimal,
/// `AlmostSolved` to inaccurate, infeasibility certificates to infeasible,
/// anything else to failure.
pub fn solve_conic(prog: &ConicProgram, settings: &ConicSettings) -> Result<ConicSolution> {
    let n = prog.n_vars();
    let mut rows_i = Vec::new();
    let mut cols_j = Vec::new();
    let mut vals = Vec::new();
    let mut b = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    let sqrt2 = std::f64::consts::SQRT_2;

    let mut row = 0usize;
    for c in &prog.constraints {
        let scale_at = |idx: usize| -> f64 {
            if let ConeKind::Psd(_) = c.kind {
                // off-diagonal entries of the triangle are scaled by sqrt(2)
                let mut col = 0;
                while (col + 1) * (col + 2) / 2 <= idx {
                    col += 1;
                }
                let r = idx - col * (col + 1) / 2;
                if r == col {
                    1.0
                } else {
                    sqrt2
                }
            } else {
                1.0
            }
        };
        for (idx, e) in c.exprs.iter().enumerate() {
            let s = scale_at(idx);
            let e = e.compact();
            for (v, coef) in &e.terms {
                if *v >= n {
                    return Err(Error::Dimension(format!(
                        "constraint {} references undeclared variable {v}",
                        c.label
                    )));
                }
                rows_i.push(row);
                cols_j.push(*v);
                vals.push(-coef * s);
            }
            b.push(e.constant * s);
            row += 1;
        }
        let cone = match c.kind {
            ConeKind::Zero => SupportedConeT::ZeroConeT(c.exprs.len()),
            ConeKind::NonNeg => SupportedConeT::NonnegativeConeT(c.exprs.len()),
            ConeKind::Soc => SupportedConeT::SecondOrderConeT(c.exprs.len()),
            ConeKind::Exp => {
                if c.exprs.len() != 3 {
                    return Err(Error::Dimension(format!("exp cone {} needs 3 entries", c.label)));
                }
                SupportedConeT::ExponentialConeT()
            }
            ConeKind::Psd(k) => {
                if c.exprs.len() != k * (k + 1) / 2 {
                    return Err(Error::Dimension(format!("psd cone {} has wrong size", c.label)));
                }
                SupportedConeT::PSDTriangleConeT(k)
            }
        };
        cones.push(cone);
    }
    let m = row;
    let a = CscMatrix::new_from_triplets(m, n, rows_i, cols_j, vals);
    let p = CscMatrix::<f64>::zeros((n, n));
    let obj = prog.objective.compact();
    let mut q = vec![0.0; n];
    for (v, c) in &obj.terms {
        q[*v] += c;
    }
    let tol = settings.tol;
    let clarabel_settings = DefaultSettingsBuilder::<f64>::default()
        .verbose(std::env::var_os("UAV_CONIC_VERBOSE").is_some())
        .max_iter(settings.max_iter)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .tol_ktratio(1e-7)
        .build()
        .map_err(|e| Error::Solver { status: "settings".into(), detail: format!("{e:?}") })?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, clarabel_settings)
        .map_err(|e| Error::Solver { status: "setup".into(), detail: e.to_string() })?;
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved => ConicStatus::Optimal,
        SolverStatus::AlmostSolved => ConicStatus::Inaccurate,
        SolverStatus::PrimalInfeasible
        | SolverStatus::AlmostPrimalInfeasible
        | SolverStatus::DualInfeasible
        | SolverStatus::AlmostDualInfeasible => ConicStatus::Infeasible,
        _ => ConicStatus::Failure,
    };
    Ok(ConicSolution {
        status,
        objective: sol.obj_val + obj.constant,
        x: sol.x.clone(),
        iterations: sol.iterations,
        solve_time: sol.solve_time,
        raw_status: format!("{:?}", sol.status),
    })
}

/// Largest constraint residual for which a stalled solve is still used.
pub const STALL_RESIDUAL_TOL: f64 = 1e-6;

/// Like [`solve_conic`] but turns non-usable statuses into an error carrying
/// the worst constraint residuals.
///
/// A solver that stalls (insufficient progress or iteration limit) often
/// stops at a point that is feasible for all practical purposes; such a
/// point is accepted as inaccurate when every constraint residual is at most
/// [`STALL_RESIDUAL_TOL`].
pub fn solve_checked(prog: &ConicProgram, settings: &ConicSettings, what: &str) -> Result<ConicSolution> {
    let mut sol = solve_conic(prog, settings)?;
    if sol.usable() {
        return Ok(sol);
    }
    let mut res = constraint_residuals(prog, &sol.x);
    let stalled = matches!(sol.raw_status.as_str(), "InsufficientProgress" | "MaxIterations");
    let worst = res.iter().map(|r| r.1).fold(0.0, f64::max);
    if stalled && sol.x.iter().all(|v| v.is_finite()) && worst <= STALL_RESIDUAL_TOL {
        log::debug!("{what}: accepting {} iterate with worst residual {worst:.2e}", sol.raw_status);
        sol.status = ConicStatus::Inaccurate;
        return Ok(sol);
    }
    res.sort_by(|a, b| b.1.total_cmp(&a.1));
    let detail = res
        .iter()
        .take(5)
        .map(|(l, r)| format!("{l}: {r:.3e}"))
        .collect::<Vec<_>>()
        .join(", ");
    Err(Error::Solver {
        status: sol.status.to_string(),
        detail: format!("{what} ({}) worst residuals: {detail}", sol.raw_status),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{herm_eig, outer};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use num_complex::Complex64;

    #[test]
    fn trivial_lp() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.le(Affine::constant(3.0), Affine::var(x), "x>=3");
        p.minimize(Affine::var(x));
        let s = solve_conic(&p, &ConicSettings::default()).unwrap();
        assert_eq!(s.status, ConicStatus::Optimal);
        assert_relative_eq!(s.x[x], 3.0, epsilon = 1e-7);
    }

    #[test]
    fn infeasible_pair() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.le(Affine::constant(1.0), Affine::var(x), "x>=1");
        p.le(Affine::var(x), Affine::constant(0.0), "x<=0");
        p.minimize(Affine::var(x));
        let s = solve_conic(&p, &ConicSettings::default()).unwrap();
        assert_eq!(s.status, ConicStatus::Infeasible);
        assert!(solve_checked(&p, &ConicSettings::default(), "pair").is_err());
    }

    #[test]
    fn log_and_soc() {
        // max t s.t. t <= ln(u), u <= e^2  -> t = 2
        let mut p = ConicProgram::new();
        let t = p.add_var("t");
        let u = p.add_var("u");
        p.log_ge(Affine::var(u), Affine::var(t), "log");
        p.le(Affine::var(u), Affine::constant(2f64.exp()), "cap");
        p.minimize(-Affine::var(t));
        let s = solve_conic(&p, &ConicSettings::default()).unwrap();
        assert_relative_eq!(s.x[t], 2.0, epsilon = 1e-6);

        // min x + y s.t. x^2 + 4 y^2 <= 1 -> -(sqrt(1 + 1/4))
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.quad_le(vec![(1.0, Affine::var(x)), (4.0, Affine::var(y))], Affine::constant(1.0), "ell");
        p.minimize(Affine::var(x) + Affine::var(y));
        let s = solve_conic(&p, &ConicSettings::default()).unwrap();
        assert_relative_eq!(s.objective, -(1.25f64).sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn rank_one_trace_sdp() {
        // min Tr(W) s.t. Tr(W A) >= 1, W PSD, A = a a^H / M with |a|^2 = M
        let m = 4;
        let a = DVector::from_fn(m, |i, _| Complex64::from_polar(1.0, 0.7 * i as f64));
        let amat = outer(&a) * Complex64::new(1.0 / m as f64, 0.0);
        let mut p = ConicProgram::new();
        let w = p.add_herm(m, "W");
        p.herm_psd(&w.expr(), "psd");
        p.le(Affine::constant(1.0), w.trace_with(&amat), "gain");
        p.minimize(w.trace());
        let s = solve_conic(&p, &ConicSettings::default()).unwrap();
        // eigen-oracle: the optimum is 1 / lambda_max(A)
        let lam_max = herm_eig(&amat).0[0];
        assert_relative_eq!(lam_max, a.norm_squared() / m as f64, epsilon = 1e-10);
        assert_relative_eq!(s.objective, 1.0 / lam_max, epsilon = 1e-6);
        let wv = w.value(&s.x);
        let (vals, _) = herm_eig(&wv);
        assert!(vals[1] / vals[0] < 1e-5);

        // unnormalized data A = a a^H gives 1 / M
        let mut p = ConicProgram::new();
        let w = p.add_herm(m, "W");
        p.herm_psd(&w.expr(), "psd");
        p.le(Affine::constant(1.0), w.trace_with(&outer(&a)), "gain");
        p.minimize(w.trace());
        let s = solve_conic(&p, &ConicSettings::default()).unwrap();
        assert_relative_eq!(s.objective, 1.0 / m as f64, epsilon = 1e-6);
    }

    #[test]
    fn hermitian_trace_matches_matrix_product() {
        let m = 3;
        let mut p = ConicProgram::new();
        let w = p.add_herm(m, "W");
        let x: Vec<f64> = (0..p.n_vars()).map(|i| 0.1 * i as f64 - 0.3).collect();
        let wv = w.value(&x);
        assert!((&wv - wv.adjoint()).norm() < 1e-15);
        let a = DVector::from_fn(m, |i, _| Complex64::new(1.0 + i as f64, 0.5 - i as f64));
        let amat = outer(&a);
        assert_relative_eq!(w.trace_with(&amat).eval(&x), (&wv * &amat).trace().re, epsilon = 1e-12);
    }
}
