//! Sample statistics for aggregate tables.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

/// Mean, sample standard deviation, standard error, and the half width of
/// a two-sided 95% Student-t interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_err: f64,
    pub ci95: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                n,
                mean: f64::NAN,
                std_dev: f64::NAN,
                std_err: f64::NAN,
                ci95: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self {
                n,
                mean,
                std_dev: 0.0,
                std_err: 0.0,
                ci95: 0.0,
            };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std_dev = var.sqrt();
        let std_err = std_dev / (n as f64).sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        Self {
            n,
            mean,
            std_dev,
            std_err,
            ci95: t * std_err,
        }
    }
}

/// `sqrt(se_a² + se_b²)`.
pub fn pooled_se(a: &Summary, b: &Summary) -> f64 {
    a.std_err.hypot(b.std_err)
}

/// Two-sided χ² acceptance interval with total coverage `coverage`.
pub fn chi2_bounds(dof: usize, coverage: f64) -> (f64, f64) {
    let d = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    let tail = 0.5 * (1.0 - coverage);
    (d.inverse_cdf(tail), d.inverse_cdf(1.0 - tail))
}
