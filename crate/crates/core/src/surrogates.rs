//! Convex surrogates and exact expansions shared by both subproblems.
//!
//! Every surrogate is tangent at its expansion point and one-sided
//! everywhere, which is what makes each replaced constraint conservative.
//! The sampling certificates at the bottom check both properties.

use std::f64::consts::{LN_2, PI};

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::linalg::CMatrix;
use crate::scenario::{ScenarioConfig, Vec2};

/// Point around which every first-order expansion of one AO iteration is
/// taken.
#[derive(Debug, Clone)]
pub struct ExpansionPoint {
    pub iteration: usize,
    pub mu_t: Vec<Vec<f64>>,
    pub phi_t: Vec<Vec<f64>>,
    pub mu_ke_t: Vec<Vec<Vec<f64>>>,
    pub alpha_t: Vec<Vec<f64>>,
    pub q_t: Vec<Vec2>,
    pub v_t: Vec<Vec2>,
    pub y_t: Vec<f64>,
    pub mu_prime_t: Vec<Vec<f64>>,
    pub beta_t: Vec<Vec<f64>>,
}

impl ExpansionPoint {
    pub fn is_finite(&self) -> bool {
        let all = |v: &Vec<Vec<f64>>| v.iter().flatten().all(|x| x.is_finite());
        all(&self.mu_t)
            && all(&self.phi_t)
            && all(&self.alpha_t)
            && all(&self.mu_prime_t)
            && all(&self.beta_t)
            && self.mu_ke_t.iter().flatten().flatten().all(|x| x.is_finite())
            && self.q_t.iter().chain(&self.v_t).all(|p| p.x.is_finite() && p.y.is_finite())
            && self.y_t.iter().all(|x| x.is_finite())
    }
}

/// Upper bound of the product `mu * phi`, tangent at `(mu_t, phi_t)`.
pub fn bilinear_surrogate(mu: f64, phi: f64, mu_t: f64, phi_t: f64) -> f64 {
    0.5 * (mu + phi).powi(2) - 0.5 * (mu_t * mu_t + phi_t * phi_t) - mu_t * (mu - mu_t) - phi_t * (phi - phi_t)
}

/// Tangent of `log2(1 + mu)` at `mu_t` (upper bound by concavity).
pub fn log_upper(mu: f64, mu_t: f64) -> f64 {
    (1.0 + mu_t).log2() + (mu - mu_t) / ((1.0 + mu_t) * LN_2)
}

/// Linear majorizer of `sum (alpha - alpha^2)`.
pub fn binary_penalty(alpha: &[f64], alpha_t: &[f64]) -> f64 {
    alpha.iter().zip(alpha_t).map(|(a, at)| a - at * (2.0 * a - at)).sum()
}

/// Tangent lower bound of `y^2 + |v|^2 / v0^2`.
pub fn velocity_lower_bound(y: f64, v: &Vec2, y_t: f64, v_t: &Vec2, v0: f64) -> f64 {
    let v0s = v0 * v0;
    y_t * y_t + v_t.norm_squared() / v0s + 2.0 * y_t * (y - y_t) + 2.0 / v0s * v_t.dot(&(v - v_t))
}

/// Geometry of one UAV/ground-node pair as seen by the array.
#[derive(Debug, Clone, Copy)]
pub struct ArrayGeometry {
    pub altitude: f64,
    pub spacing: f64,
    pub wavelength: f64,
}

impl ArrayGeometry {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        ArrayGeometry { altitude: cfg.altitude, spacing: cfg.radar.antenna_spacing, wavelength: cfg.radar.wavelength }
    }

    fn phase_rate(&self, gap: usize) -> f64 {
        2.0 * PI * self.spacing / self.wavelength * gap as f64
    }
}

/// `(U, J)` with `a^H W a = U + J`: the diagonal part and the pairwise
/// cosine sum over antenna pairs (unscaled by the path gain).
pub fn pair_decomposition(w: &CMatrix, q: &Vec2, d: &Vec2, geo: &ArrayGeometry) -> (f64, f64) {
    let m = w.nrows();
    let h = geo.altitude;
    let cos_t = h / ((q - d).norm_squared() + h * h).sqrt();
    let u: f64 = (0..m).map(|i| w[(i, i)].re).sum();
    let mut j = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            let z = w[(a, b)];
            j += 2.0 * z.norm() * (geo.phase_rate(b - a) * cos_t + z.arg()).cos();
        }
    }
    (u, j)
}

/// Gradient of the pair sum with respect to the horizontal UAV position.
pub fn pair_gradient(w: &CMatrix, q: &Vec2, d: &Vec2, geo: &ArrayGeometry) -> Vec2 {
    let m = w.nrows();
    let h = geo.altitude;
    let diff = q - d;
    let rho = (diff.norm_squared() + h * h).sqrt();
    let cos_t = h / rho;
    let mut coef = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            let z = w[(a, b)];
            let c = geo.phase_rate(b - a);
            coef += 2.0 * z.norm() * (c * cos_t + z.arg()).sin() * c;
        }
    }
    diff * (coef * h / rho.powi(3))
}

/// Upper bound on the Hessian norm of the pair sum over all positions.
pub fn pair_curvature_bound(w: &CMatrix, geo: &ArrayGeometry) -> f64 {
    let m = w.nrows();
    let h2 = geo.altitude * geo.altitude;
    let mut l = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            let c = geo.phase_rate(b - a);
            l += 2.0 * w[(a, b)].norm() * (c * c * 4.0 / 27.0 + 2.0 * c) / h2;
        }
    }
    l
}

/// `(U, J)` in physical units (scaled by the reference path gain).
pub fn trace_term_j(w: &CMatrix, q: &Vec2, d: &Vec2, cfg: &ScenarioConfig) -> (f64, f64) {
    let (u, j) = pair_decomposition(w, q, d, &ArrayGeometry::from_config(cfg));
    let b = cfg.beta0_sq();
    (b * u, b * j)
}

pub fn trace_term_gradient(w: &CMatrix, q: &Vec2, d: &Vec2, cfg: &ScenarioConfig) -> Vec2 {
    pair_gradient(w, q, d, &ArrayGeometry::from_config(cfg)) * cfg.beta0_sq()
}

/// First-order expansion of the pair sum around `q_t`.
pub fn affine_j(w: &CMatrix, q: &Vec2, q_t: &Vec2, d: &Vec2, cfg: &ScenarioConfig) -> f64 {
    let (_, j) = trace_term_j(w, q_t, d, cfg);
    j + trace_term_gradient(w, q_t, d, cfg).dot(&(q - q_t))
}

/// Result of a sampling certificate.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub name: String,
    pub samples: usize,
    /// Largest violation of the one-sided (or agreement) property.
    pub worst_violation: f64,
    /// Largest deviation from the original function at the expansion point.
    pub tangency_error: f64,
    pub passed: bool,
}

fn cert(name: &str, samples: usize, worst: f64, tangency: f64, tol: f64) -> Certificate {
    Certificate {
        name: name.into(),
        samples,
        worst_violation: worst,
        tangency_error: tangency,
        passed: worst <= tol && tangency <= tol,
    }
}

/// Samples every surrogate and checks one-sidedness and tangency.
pub fn bounds_certificates(samples: usize, seed: u64) -> Vec<Certificate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let (mut worst, mut tang) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let (mu, phi, mt, pt) = (
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
        );
        worst = worst.max(mu * phi - bilinear_surrogate(mu, phi, mt, pt));
        tang = tang.max((bilinear_surrogate(mt, pt, mt, pt) - mt * pt).abs() / (1.0 + (mt * pt).abs()));
    }
    out.push(cert("bilinear_surrogate", samples, worst, tang, 1e-9));

    let (mut worst, mut tang) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let mu: f64 = rng.gen_range(-0.99..100.0);
        let mt: f64 = rng.gen_range(-0.99..100.0);
        worst = worst.max((1.0 + mu).log2() - log_upper(mu, mt));
        tang = tang.max((log_upper(mt, mt) - (1.0 + mt).log2()).abs());
    }
    out.push(cert("log_upper", samples, worst, tang, 1e-9));

    let (mut worst, mut tang) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let a: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
        let at: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
        let exact = |x: &[f64]| x.iter().map(|v| v - v * v).sum::<f64>();
        worst = worst.max(exact(&a) - binary_penalty(&a, &at));
        tang = tang.max((binary_penalty(&at, &at) - exact(&at)).abs());
    }
    out.push(cert("binary_penalty", samples, worst, tang, 1e-9));

    let (mut worst, mut tang) = (0.0f64, 0.0f64);
    let v0 = 4.03;
    for _ in 0..samples {
        let y = rng.gen_range(0.01..5.0);
        let yt = rng.gen_range(0.01..5.0);
        let v = Vector2::new(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0));
        let vt = Vector2::new(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0));
        let exact = |y: f64, v: &Vec2| y * y + v.norm_squared() / (v0 * v0);
        worst = worst.max(velocity_lower_bound(y, &v, yt, &vt, v0) - exact(y, &v));
        tang = tang.max((velocity_lower_bound(yt, &vt, yt, &vt, v0) - exact(yt, &vt)).abs() / exact(yt, &vt));
    }
    out.push(cert("velocity_lower_bound", samples, worst, tang, 1e-9));
    out
}

fn random_hermitian_psd(m: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(m, m, |_, _| num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    &g * g.adjoint()
}

/// Checks the pair decomposition against the direct quadratic form and the
/// analytic gradient against central finite differences.
pub fn gradient_certificates(samples: usize, seed: u64, cfg: &ScenarioConfig) -> Vec<Certificate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geo = ArrayGeometry::from_config(cfg);
    let m = cfg.n_antennas;
    let span = cfg.area_size;
    let (mut dec, mut grad, mut curv) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let w = random_hermitian_psd(m, &mut rng);
        let q = Vector2::new(rng.gen_range(-span..span), rng.gen_range(-span..span));
        let d = Vector2::new(rng.gen_range(0.0..span), rng.gen_range(0.0..span));
        let (u, j) = pair_decomposition(&w, &q, &d, &geo);
        let a = crate::scenario::steering_vector(&q, &d, geo.altitude, m, geo.spacing, geo.wavelength);
        let direct = crate::linalg::quad_form(&w, &a);
        dec = dec.max((u + j - direct).abs() / (1.0 + direct.abs()));

        let g = pair_gradient(&w, &q, &d, &geo);
        let h = 1e-4;
        let fd = Vector2::new(
            (pair_decomposition(&w, &(q + Vector2::new(h, 0.0)), &d, &geo).1
                - pair_decomposition(&w, &(q - Vector2::new(h, 0.0)), &d, &geo).1)
                / (2.0 * h),
            (pair_decomposition(&w, &(q + Vector2::new(0.0, h)), &d, &geo).1
                - pair_decomposition(&w, &(q - Vector2::new(0.0, h)), &d, &geo).1)
                / (2.0 * h),
        );
        let scale = g.norm().max(fd.norm()).max(1e-6 * w.norm());
        grad = grad.max((g - fd).norm() / scale);

        // second-order remainder never exceeds the curvature bound
        let step = Vector2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
        let lin = j + g.dot(&step);
        let actual = pair_decomposition(&w, &(q + step), &d, &geo).1;
        let l = pair_curvature_bound(&w, &geo);
        curv = curv.max((actual - lin).abs() - 0.5 * l * step.norm_squared());
    }
    vec![
        cert("pair_decomposition", samples, dec, 0.0, 1e-9),
        cert("pair_gradient", samples, grad, 0.0, 1e-5),
        cert("pair_curvature_bound", samples, curv.max(0.0), 0.0, 1e-9),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{czero, quad_form};
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn bilinear_examples() {
        assert_eq!(bilinear_surrogate(2.0, 3.0, 2.0, 3.0), 6.0);
        assert_eq!(bilinear_surrogate(1.0, 2.0, 0.0, 0.0), 4.5);
    }

    #[test]
    fn log_examples() {
        assert_relative_eq!(log_upper(3.0, 3.0), 2.0, epsilon = 1e-15);
        assert_relative_eq!(log_upper(1.0, 0.0), 1.0 / LN_2, epsilon = 1e-15);
        // quadratic gap
        let g1 = log_upper(1.0 + 1e-2, 1.0) - (2.0 + 1e-2f64).log2();
        let g2 = log_upper(1.0 + 5e-3, 1.0) - (2.0 + 5e-3f64).log2();
        assert_relative_eq!(g1 / g2, 4.0, max_relative = 1e-2);
    }

    #[test]
    fn binary_examples() {
        assert_eq!(binary_penalty(&[0.0, 1.0, 1.0], &[0.0, 1.0, 1.0]), 0.0);
        assert_relative_eq!(binary_penalty(&[0.5], &[0.5]), 0.25);
    }

    #[test]
    fn velocity_examples() {
        let v = Vector2::new(1.0, -2.0);
        assert_relative_eq!(velocity_lower_bound(0.7, &v, 0.7, &v, 4.0), 0.49 + 5.0 / 16.0, epsilon = 1e-15);
        let z = Vector2::zeros();
        for y in [0.0, 0.5, 1.0, 3.0] {
            let g = velocity_lower_bound(y, &z, 1.0, &z, 4.0);
            assert_relative_eq!(g, 2.0 * y - 1.0);
            assert!(g <= y * y);
        }
    }

    #[test]
    fn pair_terms_examples() {
        let cfg = ScenarioConfig::table2();
        let q = Vector2::new(10.0, 30.0);
        let d = cfg.users[0];
        let mut one = cfg.clone();
        one.n_antennas = 1;
        let w1 = CMatrix::from_element(1, 1, Complex64::new(2.5, 0.0));
        let (u, j) = trace_term_j(&w1, &q, &d, &one);
        assert_eq!(j, 0.0);
        assert_relative_eq!(u, cfg.beta0_sq() * 2.5);
        assert_eq!(trace_term_gradient(&w1, &q, &d, &one), Vector2::zeros());

        let id = CMatrix::identity(6, 6);
        let (u, j) = trace_term_j(&id, &q, &d, &cfg);
        assert_eq!(j, 0.0);
        assert_relative_eq!(u, 6.0 * cfg.beta0_sq());

        let w = &cfg.channel(&q, 1) * cfg.channel(&q, 1).adjoint() + CMatrix::identity(6, 6);
        assert_eq!(trace_term_gradient(&w, &d, &d, &cfg), Vector2::zeros());
        let (u, j) = trace_term_j(&w, &q, &d, &cfg);
        let direct = cfg.beta0_sq() * quad_form(&w, &cfg.steering(&q, &d));
        assert_relative_eq!(u + j, direct, max_relative = 1e-9);
        let _ = czero(1);
    }

    #[test]
    fn affine_j_is_first_order() {
        let cfg = ScenarioConfig::table2();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_hermitian_psd(6, &mut rng);
        let d = cfg.targets[0];
        let qt = d + Vector2::new(60.0, -40.0);
        assert_relative_eq!(affine_j(&w, &qt, &qt, &d, &cfg), trace_term_j(&w, &qt, &d, &cfg).1);
        let dir = Vector2::new(0.6, 0.8);
        let err = |eps: f64| {
            let q = qt + dir * eps;
            (affine_j(&w, &q, &qt, &d, &cfg) - trace_term_j(&w, &q, &d, &cfg).1).abs()
        };
        let ratio = err(0.2) / err(0.1);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn certificates_pass() {
        for c in bounds_certificates(10_000, 11) {
            assert!(c.passed, "{c:?}");
        }
        for c in gradient_certificates(2_000, 12, &ScenarioConfig::table2()) {
            assert!(c.passed, "{c:?}");
        }
    }

    proptest! {
        #[test]
        fn bilinear_majorizes(mu in -50.0f64..50.0, phi in -50.0f64..50.0, mt in -50.0f64..50.0, pt in -50.0f64..50.0) {
            prop_assert!(bilinear_surrogate(mu, phi, mt, pt) >= mu * phi - 1e-9);
        }

        #[test]
        fn log_tangent_above(mu in -0.999f64..1e3, mt in -0.999f64..1e3) {
            prop_assert!(log_upper(mu, mt) >= (1.0 + mu).log2() - 1e-12);
        }

        #[test]
        fn decomposition_for_any_hermitian(seed in 0u64..500, qx in -200.0f64..200.0, qy in -200.0f64..200.0) {
            // not only PSD: any Hermitian matrix
            let cfg = ScenarioConfig::table2();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = CMatrix::from_fn(6, 6, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let w = &g + g.adjoint();
            let q = Vector2::new(qx, qy);
            let (u, j) = pair_decomposition(&w, &q, &cfg.users[0], &ArrayGeometry::from_config(&cfg));
            let direct = quad_form(&w, &cfg.steering(&q, &cfg.users[0]));
            prop_assert!((u + j - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        }
    }
}
