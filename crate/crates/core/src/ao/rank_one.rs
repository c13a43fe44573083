//! Recovery of beamforming vectors from the relaxed covariances.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::comms::sinr;
use crate::linalg::{herm_eig, outer, CMatrix};
use crate::scenario::{CVector, ScenarioConfig, Vec2};

/// Rank gap above which randomization is used.
pub const RANK_GAP_TOL: f64 = 1e-3;
const DRAWS: usize = 100;
/// Covariances whose trace is below this fraction of the largest one carry
/// only solver noise and are extracted as zero beams.
const NEGLIGIBLE_TRACE: f64 = 1e-8;
/// Same, in units of the power giving unit SNR at the flight altitude.
const NEGLIGIBLE_SNR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionPath {
    Principal,
    Randomized,
}

#[derive(Debug, Clone)]
pub struct RankOne {
    pub w: CVector,
    /// `lambda_2 / lambda_1` (0 for a zero matrix).
    pub rank_gap: f64,
    pub path: ExtractionPath,
}

/// Principal eigenvector scaled by `sqrt(lambda_1)`. The randomized path is
/// chosen when the rank gap exceeds [`RANK_GAP_TOL`]; for a single matrix it
/// keeps the draw with the largest gain along the principal direction,
/// rescaled to the covariance trace.
pub fn extract_rank_one(w: &CMatrix, seed: u64) -> RankOne {
    let m = w.nrows();
    let (vals, vecs) = herm_eig(w);
    let l1 = vals[0].max(0.0);
    if l1 <= 0.0 {
        return RankOne { w: CVector::zeros(m), rank_gap: 0.0, path: ExtractionPath::Principal };
    }
    let rank_gap = if m > 1 { vals[1].max(0.0) / l1 } else { 0.0 };
    let principal = &vecs[0] * Complex64::new(l1.sqrt(), 0.0);
    if rank_gap <= RANK_GAP_TOL {
        return RankOne { w: principal, rank_gap, path: ExtractionPath::Principal };
    }
    let draws = gaussian_draws(w, seed);
    let trace = w.trace().re;
    let best = draws
        .into_iter()
        .map(|x| {
            let s = (trace / x.norm_squared()).sqrt();
            x * Complex64::new(s, 0.0)
        })
        .max_by(|a, b| vecs[0].dotc(a).norm().total_cmp(&vecs[0].dotc(b).norm()))
        .unwrap_or(principal);
    RankOne { w: best, rank_gap, path: ExtractionPath::Randomized }
}

/// `DRAWS` samples `W^{1/2} xi` with `xi ~ CN(0, I)`.
fn gaussian_draws(w: &CMatrix, seed: u64) -> Vec<CVector> {
    let m = w.nrows();
    let (vals, vecs) = herm_eig(w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..DRAWS)
        .map(|_| {
            let mut x = CVector::zeros(m);
            for (l, u) in vals.iter().zip(&vecs) {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                let xi = Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2;
                x += u * (xi * l.max(0.0).sqrt());
            }
            x
        })
        .collect()
}

/// Per-slot extraction result for all users.
#[derive(Debug, Clone, Serialize)]
pub struct BeamExtraction {
    /// `[k][n]` rank gaps.
    pub rank_gaps: Vec<Vec<f64>>,
    /// `[k][n]` paths taken.
    pub paths: Vec<Vec<ExtractionPath>>,
    #[serde(skip)]
    pub beams: Vec<Vec<CVector>>,
    /// Largest rank gap.
    pub worst_gap: f64,
}

impl BeamExtraction {
    /// Extracts every covariance. Slots with a rank gap above the tolerance
    /// are redrawn jointly: each of the 100 draws assigns every user a
    /// randomized vector, and the draw maximizing the smallest
    /// SINR-to-relaxed-SINR ratio is kept.
    pub fn from_covariances(w: &[Vec<CMatrix>], q: &[Vec2], cfg: &ScenarioConfig, seed: u64) -> Self {
        let k_count = w.len();
        let n_slots = w.first().map_or(0, |r| r.len());
        let mut rank_gaps = vec![vec![0.0; n_slots]; k_count];
        let mut paths = vec![vec![ExtractionPath::Principal; n_slots]; k_count];
        let mut beams = vec![vec![CVector::zeros(cfg.n_antennas); n_slots]; k_count];
        let largest = w.iter().flatten().map(|c| c.trace().re).fold(0.0, f64::max);
        let floor = (NEGLIGIBLE_TRACE * largest).max(NEGLIGIBLE_SNR * crate::ao::Scales::new(cfg).w);
        for n in 0..n_slots {
            let mut needs_draw = false;
            for k in 0..k_count {
                if w[k][n].trace().re <= floor {
                    continue;
                }
                let r = extract_rank_one(&w[k][n], seed ^ ((n * 131 + k) as u64));
                rank_gaps[k][n] = r.rank_gap;
                needs_draw |= r.path == ExtractionPath::Randomized;
                beams[k][n] = r.w;
            }
            if !needs_draw {
                continue;
            }
            let slot_w: Vec<CMatrix> = (0..k_count).map(|k| w[k][n].clone()).collect();
            let relaxed: Vec<f64> = (0..k_count).map(|k| sinr(k, &slot_w, &q[n], cfg)).collect();
            let draws: Vec<Vec<CVector>> =
                (0..k_count).map(|k| gaussian_draws(&w[k][n], seed ^ ((n * 7919 + k) as u64))).collect();
            let mut best_score = f64::NEG_INFINITY;
            let mut best: Option<Vec<CVector>> = None;
            for d in 0..DRAWS {
                let cand: Vec<CVector> = (0..k_count)
                    .map(|k| {
                        let x = &draws[k][d];
                        let nrm = x.norm_squared();
                        if nrm > 0.0 {
                            x * Complex64::new((w[k][n].trace().re / nrm).sqrt(), 0.0)
                        } else {
                            x.clone()
                        }
                    })
                    .collect();
                let cov: Vec<CMatrix> = cand.iter().map(outer).collect();
                let score = (0..k_count)
                    .filter(|k| relaxed[*k] > 0.0)
                    .map(|k| sinr(k, &cov, &q[n], cfg) / relaxed[k])
                    .fold(f64::INFINITY, f64::min);
                if score > best_score {
                    best_score = score;
                    best = Some(cand);
                }
            }
            if let Some(b) = best {
                for k in (0..k_count).filter(|k| w[*k][n].trace().re > floor) {
                    if rank_gaps[k][n] > RANK_GAP_TOL {
                        paths[k][n] = ExtractionPath::Randomized;
                    }
                    beams[k][n] = b[k].clone();
                }
            }
        }
        let worst_gap = rank_gaps.iter().flatten().copied().fold(0.0, f64::max);
        BeamExtraction { rank_gaps, paths, beams, worst_gap }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::outer;

    #[test]
    fn exact_rank_one_recovers_vector() {
        let v = CVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.3), Complex64::new(0.0, 1.0)]);
        let r = extract_rank_one(&outer(&v), 1);
        assert_eq!(r.path, ExtractionPath::Principal);
        assert!(r.rank_gap <= 1e-12);
        // equal up to a global phase
        let phase = v.dotc(&r.w);
        let aligned = &r.w * (phase.conj() / phase.norm());
        assert!((&aligned - &v).norm() < 1e-10, "{}", (&aligned - &v).norm());
    }

    #[test]
    fn identity_takes_randomized_path() {
        let r = extract_rank_one(&CMatrix::identity(4, 4), 3);
        assert_eq!(r.path, ExtractionPath::Randomized);
        assert!((r.rank_gap - 1.0).abs() < 1e-12);
        assert!((r.w.norm_squared() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn negligible_covariance_counts_as_zero() {
        let cfg = ScenarioConfig::desk();
        let big = outer(&CVector::from_element(cfg.n_antennas, Complex64::new(1.0, 0.0)));
        let noise = CMatrix::identity(cfg.n_antennas, cfg.n_antennas) * Complex64::new(1e-12, 0.0);
        let w = vec![vec![big], vec![noise]];
        let q = vec![Vec2::new(10.0, 10.0)];
        let ex = BeamExtraction::from_covariances(&w, &q, &cfg, 1);
        assert_eq!(ex.rank_gaps[1][0], 0.0);
        assert_eq!(ex.beams[1][0].norm(), 0.0);
        assert!(ex.worst_gap < 1e-12);
    }

    #[test]
    fn zero_matrix_gives_zero_vector() {
        let r = extract_rank_one(&CMatrix::zeros(3, 3), 0);
        assert_eq!(r.w.norm(), 0.0);
        assert_eq!(r.rank_gap, 0.0);
    }
}
