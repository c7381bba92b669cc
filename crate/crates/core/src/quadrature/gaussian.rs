use nalgebra::{DMatrix, DVector};

use super::multi::MultiRule;
use crate::error::{Error, Result};
use crate::linalg::{clamp_psd, psd_sqrt, symmetrize};

/// Mean and covariance of a Gaussian over the tractable block.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianStat {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianStat {
    /// Validates shape and symmetry (1e-12), then clamps the covariance to
    /// the PSD cone. Eigenvalues below -1e-10 are rejected.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::Argument(format!(
                "covariance is {}x{}, mean has length {d}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
            return Err(Error::numerical("covariance is not symmetric", &cov));
        }
        let min_eig = if d == 0 {
            0.0
        } else {
            cov.clone().symmetric_eigenvalues().min()
        };
        if min_eig < -1e-10 {
            return Err(Error::numerical("covariance is not positive semidefinite", &cov));
        }
        let cov = if min_eig < 0.0 {
            clamp_psd(&cov)
        } else {
            symmetrize(&cov)
        };
        Ok(Self { mean, cov })
    }

    /// Builds without validation. Callers guarantee symmetry and PSD.
    pub fn new_unchecked(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn dirac(mean: DVector<f64>) -> Self {
        let d = mean.len();
        Self {
            mean,
            cov: DMatrix::zeros(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Lower-triangular factor used to place quadrature nodes.
    pub fn sqrt_factor(&self) -> DMatrix<f64> {
        psd_sqrt(&self.cov)
    }

    /// Rule nodes mapped onto this Gaussian: `μ + L u_k`.
    pub fn placed_nodes(&self, rule: &MultiRule) -> Result<Vec<DVector<f64>>> {
        self.placed_nodes_with(rule, &self.sqrt_factor())
    }

    /// As [`GaussianStat::placed_nodes`], with a caller-supplied square root.
    pub fn placed_nodes_with(&self, rule: &MultiRule, factor: &DMatrix<f64>) -> Result<Vec<DVector<f64>>> {
        if rule.dim() != self.dim() {
            return Err(Error::Argument(format!(
                "rule dimension {} does not match Gaussian dimension {}",
                rule.dim(),
                self.dim()
            )));
        }
        Ok(rule
            .nodes()
            .map(|u| &self.mean + factor * DVector::from_column_slice(u))
            .collect())
    }
}

/// `Σ_k w_k f(μ + L u_k)` for a scalar integrand.
pub fn expect_gaussian(g: &GaussianStat, rule: &MultiRule, f: impl Fn(&DVector<f64>) -> f64) -> Result<f64> {
    let nodes = g.placed_nodes(rule)?;
    Ok(nodes.iter().zip(rule.weights()).map(|(x, w)| w * f(x)).sum())
}

/// `Σ_k w_k f(μ + L u_k)` for a vector integrand.
pub fn expect_gaussian_vec(
    g: &GaussianStat,
    rule: &MultiRule,
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
) -> Result<DVector<f64>> {
    let nodes = g.placed_nodes(rule)?;
    let mut acc: Option<DVector<f64>> = None;
    for (x, w) in nodes.iter().zip(rule.weights()) {
        let y = f(x) * *w;
        acc = Some(match acc {
            Some(a) => a + y,
            None => y,
        });
    }
    acc.ok_or_else(|| Error::Argument("empty quadrature rule".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{gauss_hermite_rule, smolyak_rule, tensor_rule, Growth};

    fn sample_gaussian() -> GaussianStat {
        GaussianStat::new(
            DVector::from_vec(vec![1.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]),
        )
        .unwrap()
    }

    #[test]
    fn identity_recovers_mean() {
        let g = sample_gaussian();
        for rule in [
            smolyak_rule(2, 2, Growth::Linear).unwrap(),
            smolyak_rule(4, 2, Growth::Linear).unwrap(),
            tensor_rule(&[gauss_hermite_rule(3).unwrap(), gauss_hermite_rule(3).unwrap()]).unwrap(),
        ] {
            let m = expect_gaussian_vec(&g, &rule, |x| x.clone()).unwrap();
            assert!((m - &g.mean).amax() < 1e-12);
        }
    }

    #[test]
    fn quadratic_form_identity() {
        let g = sample_gaussian();
        let a = DMatrix::from_row_slice(2, 2, &[1.5, -0.3, -0.3, 0.7]);
        let exact = (g.mean.transpose() * &a * &g.mean)[(0, 0)] + (&a * &g.cov).trace();
        for rule in [
            smolyak_rule(3, 2, Growth::Linear).unwrap(),
            tensor_rule(&[gauss_hermite_rule(2).unwrap(), gauss_hermite_rule(2).unwrap()]).unwrap(),
        ] {
            let v = expect_gaussian(&g, &rule, |x| (x.transpose() * &a * x)[(0, 0)]).unwrap();
            assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
        }
    }

    #[test]
    fn dimension_mismatch() {
        let g = sample_gaussian();
        let rule = smolyak_rule(3, 3, Growth::Linear).unwrap();
        assert!(matches!(expect_gaussian(&g, &rule, |_| 0.0), Err(Error::Argument(_))));
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let m = DVector::zeros(2);
        assert!(GaussianStat::new(m.clone(), DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0])).is_err());
        assert!(GaussianStat::new(m.clone(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-3])).is_err());
        let g = GaussianStat::new(m, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-11])).unwrap();
        assert!(g.cov[(1, 1)] >= 0.0);
    }

    #[test]
    fn affine_integrand_independent_of_factor() {
        let g = sample_gaussian();
        let rule = smolyak_rule(4, 2, Growth::Linear).unwrap();
        let f = |x: &DVector<f64>| 3.0 * x[0] - 0.5 * x[1] + 2.0;
        let chol = g.sqrt_factor();
        let eig = g.cov.clone().symmetric_eigen();
        let sym_sqrt =
            &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * eig.eigenvectors.transpose();
        let eval = |factor: &DMatrix<f64>| -> f64 {
            let nodes = g.placed_nodes_with(&rule, factor).unwrap();
            nodes.iter().zip(rule.weights()).map(|(x, w)| w * f(x)).sum()
        };
        assert!((eval(&chol) - eval(&sym_sqrt)).abs() < 1e-12);
    }
}
