//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::scenario::CVector;

pub type CMatrix = DMatrix<Complex64>;

pub fn czero(m: usize) -> CMatrix {
    CMatrix::zeros(m, m)
}

/// `a^H R a` (real part; the imaginary part vanishes for Hermitian `R`).
pub fn quad_form(r: &CMatrix, a: &CVector) -> f64 {
    let ra = r * a;
    a.iter().zip(ra.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// `Tr(W A)` with `A = a a^H`, i.e. `a^H W a`.
pub fn outer(a: &CVector) -> CMatrix {
    a * a.adjoint()
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order.
pub fn herm_eig(w: &CMatrix) -> (Vec<f64>, Vec<CVector>) {
    let sym = hermitize(w);
    let eig = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = idx
        .iter()
        .map(|&i| DVector::from_iterator(w.nrows(), eig.eigenvectors.column(i).iter().copied()))
        .collect();
    (vals, vecs)
}

/// `(W + W^H)/2`.
pub fn hermitize(w: &CMatrix) -> CMatrix {
    (w + w.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Projection onto the PSD cone by clipping negative eigenvalues.
pub fn project_psd(w: &CMatrix) -> CMatrix {
    let (vals, vecs) = herm_eig(w);
    let m = w.nrows();
    let mut out = czero(m);
    for (lam, v) in vals.iter().zip(vecs.iter()) {
        if *lam > 0.0 {
            out += v * v.adjoint() * Complex64::new(*lam, 0.0);
        }
    }
    out
}

pub fn min_eigenvalue(w: &CMatrix) -> f64 {
    herm_eig(w).0.last().copied().unwrap_or(0.0)
}

/// Real `2M x 2M` symmetric embedding `[[Re, -Im], [Im, Re]]`. A Hermitian
/// matrix is PSD iff its embedding is.
pub fn real_embedding(w: &CMatrix) -> DMatrix<f64> {
    let m = w.nrows();
    DMatrix::from_fn(2 * m, 2 * m, |i, j| {
        let z = w[(i % m, j % m)];
        match (i < m, j < m) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> CMatrix {
        let v = DVector::from_vec(vec![
            Complex64::new(1.0, 0.5),
            Complex64::new(-0.3, 0.2),
            Complex64::new(0.1, -1.0),
        ]);
        let u = DVector::from_vec(vec![
            Complex64::new(0.2, 0.0),
            Complex64::new(0.7, 0.1),
            Complex64::new(-0.4, 0.3),
        ]);
        outer(&v) * Complex64::new(2.0, 0.0) + outer(&u)
    }

    #[test]
    fn eig_descending_and_reconstructs() {
        let w = sample();
        let (vals, vecs) = herm_eig(&w);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        assert!(vals[2].abs() < 1e-12);
        let mut rec = czero(3);
        for (l, v) in vals.iter().zip(&vecs) {
            rec += v * v.adjoint() * Complex64::new(*l, 0.0);
        }
        assert!((rec - &w).norm() < 1e-10);
    }

    #[test]
    fn embedding_has_doubled_spectrum() {
        let w = sample();
        let (vals, _) = herm_eig(&w);
        let emb = real_embedding(&w);
        let mut ev: Vec<f64> = SymmetricEigen::new(emb).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for i in 0..3 {
            assert_relative_eq!(ev[2 * i], vals[i], epsilon = 1e-10);
            assert_relative_eq!(ev[2 * i + 1], vals[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn projection_clips() {
        let mut w = sample();
        w[(0, 0)] -= Complex64::new(5.0, 0.0);
        assert!(min_eigenvalue(&w) < 0.0);
        let p = project_psd(&w);
        assert!(min_eigenvalue(&p) > -1e-12);
    }

    #[test]
    fn quad_form_matches_trace() {
        let w = sample();
        let a = DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(1.0, 0.3),
            Complex64::from_polar(1.0, 0.6),
        ]);
        let tr = (&w * outer(&a)).trace();
        assert_relative_eq!(quad_form(&w, &a), tr.re, epsilon = 1e-12);
        assert!(tr.im.abs() < 1e-12);
    }
}
