//! Small dense helpers over `nalgebra` for the mixture models.
//!
//! Matrices are stored row-major in `Vec<f64>` inside serializable types and
//! converted to `DMatrix` only where factorizations are needed.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float as _;

pub fn to_matrix(dim: usize, row_major: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(dim, dim, row_major)
}

pub fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for r in 0..n {
        for c in (r + 1)..n {
            let v = 0.5 * (m[(r, c)] + m[(c, r)]);
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
}

/// Clip the eigenvalues of a symmetric matrix from below at `floor`.
///
/// This is the maximizer of the Gaussian covariance likelihood over the set
/// `{Σ : λ_min(Σ) ≥ floor}`, which keeps EM monotone under regularization.
pub fn floor_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return sym;
    }
    let clipped = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(floor)),
    );
    let mut out =
        &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    symmetrize(&mut out);
    out
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Inverse and log-determinant of an SPD matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    let chol = m.clone().cholesky()?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !log_det.is_finite() {
        return None;
    }
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Some((inv, log_det))
}

/// A Gaussian prepared for repeated log-density evaluation without allocation.
#[derive(Debug, Clone)]
pub struct GaussianEval {
    mean: Vec<f64>,
    precision: Vec<f64>,
    log_norm: f64,
}

impl GaussianEval {
    pub fn new(mean: &[f64], covariance: &DMatrix<f64>) -> Option<Self> {
        let (inv, log_det) = spd_inverse(covariance)?;
        let d = mean.len() as f64;
        Some(GaussianEval {
            mean: mean.to_vec(),
            precision: to_row_major(&inv),
            log_norm: -0.5 * (d * (2.0 * PI).ln() + log_det),
        })
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        let mut diff = [0.0f64; 8];
        for i in 0..d {
            diff[i] = x[i] - self.mean[i];
        }
        let mut maha = 0.0;
        for r in 0..d {
            let row = &self.precision[r * d..(r + 1) * d];
            let mut acc = 0.0;
            for c in 0..d {
                acc += row[c] * diff[c];
            }
            maha += diff[r] * acc;
        }
        self.log_norm - 0.5 * maha
    }
}

/// `ln Σ exp(v_i)`, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log-density of a 1D normal.
pub fn log_normal_1d(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (x - mean) * (x - mean) / var)
}
