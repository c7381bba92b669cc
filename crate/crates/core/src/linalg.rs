//! Small dense linear-algebra helpers shared by the quadrature and filter code.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Diagonal pivots below this are treated as zero in [`psd_sqrt`].
pub const PIVOT_FLOOR: f64 = 1e-12;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Lower-triangular square root `L` with `L Lᵀ ≈ cov` for a positive
/// semidefinite `cov`.
///
/// This is a Cholesky factorization whose pivots are clamped: any pivot at or
/// below [`PIVOT_FLOOR`] zeroes its column instead of failing, so rank
/// deficient (and slightly indefinite, from round-off) covariances are
/// accepted.
pub fn psd_sqrt(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let n = cov.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = cov[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= PIVOT_FLOOR {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = cov[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    l
}

/// Symmetrizes `cov` and lifts any eigenvalue below zero to zero.
pub fn clamp_psd(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = symmetrize(cov);
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return sym;
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    let q = &eig.eigenvectors;
    symmetrize(&(q * DMatrix::from_diagonal(&clamped) * q.transpose()))
}

/// Cholesky factor and log-determinant of a symmetric positive-definite matrix.
pub(crate) fn spd_factor(m: &DMatrix<f64>) -> Result<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numerical("matrix is not positive definite", m))?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok((chol, log_det))
}

/// Quadratic form `rᵀ M⁻¹ r`.
pub fn mahalanobis_sq(r: &DVector<f64>, m: &DMatrix<f64>) -> Result<f64> {
    let (chol, _) = spd_factor(m)?;
    let z = chol
        .l()
        .solve_lower_triangular(r)
        .expect("triangular factor is invertible");
    Ok(z.norm_squared())
}

/// `log N(r; 0, cov)`.
pub fn log_gaussian(r: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let (chol, log_det) = spd_factor(cov)?;
    let z = chol
        .l()
        .solve_lower_triangular(r)
        .expect("triangular factor is invertible");
    let n = r.len() as f64;
    Ok(-0.5 * (n * (2.0 * PI).ln() + log_det + z.norm_squared()))
}

/// `log N(r; 0, diag(var))`, the common independent-noise case.
pub fn log_gaussian_diag(r: &DVector<f64>, var: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for (ri, vi) in r.iter().zip(var.iter()) {
        acc += (2.0 * PI * vi).ln() + ri * ri / vi;
    }
    -0.5 * acc
}
