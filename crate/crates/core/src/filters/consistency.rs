use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::mahalanobis_sq;

/// A normalized squared error and its χ² degrees of freedom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsistencyStats {
    pub value: f64,
    pub dof: usize,
}

impl ConsistencyStats {
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.value >= lo && self.value <= hi
    }
}

fn normalized_square(e: &DVector<f64>, m: &DMatrix<f64>, what: &str) -> Result<ConsistencyStats> {
    if m.nrows() != e.len() || m.ncols() != e.len() {
        return Err(Error::Argument(format!("{what}: dimension mismatch")));
    }
    let value = mahalanobis_sq(e, m)?;
    Ok(ConsistencyStats { value, dof: e.len() })
}

/// Normalized estimation error squared `eᵀ P⁻¹ e`, `e = truth - estimate`.
pub fn nees(est_mean: &DVector<f64>, truth: &DVector<f64>, cov: &DMatrix<f64>) -> Result<ConsistencyStats> {
    normalized_square(&(truth - est_mean), cov, "nees")
}

/// Normalized innovation squared `νᵀ S⁻¹ ν`.
pub fn nis(innovation: &DVector<f64>, s: &DMatrix<f64>) -> Result<ConsistencyStats> {
    normalized_square(innovation, s, "nis")
}
