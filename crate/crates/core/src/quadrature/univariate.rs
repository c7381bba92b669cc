use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported univariate rule.
pub const MAX_POINTS: usize = 50;

/// Orthogonal-polynomial family selecting the weight function of a rule.
///
/// Only [`RuleFamily::Hermite`] (standard normal weight) is implemented;
/// the others are placeholders for non-Gaussian tractable blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleFamily {
    Hermite,
    Legendre,
    Laguerre,
    Jacobi,
}

impl std::str::FromStr for RuleFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hermite" => Ok(Self::Hermite),
            "legendre" => Ok(Self::Legendre),
            "laguerre" => Ok(Self::Laguerre),
            "jacobi" => Ok(Self::Jacobi),
            other => Err(Error::UnsupportedFamily(other.to_string())),
        }
    }
}

/// A one-dimensional rule integrating against the standard normal density.
#[derive(Clone, Debug, PartialEq)]
pub struct UnivariateRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl UnivariateRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

pub fn univariate_rule(family: RuleFamily, n: usize) -> Result<UnivariateRule> {
    match family {
        RuleFamily::Hermite => gauss_hermite_rule(n),
        other => Err(Error::UnsupportedFamily(format!("{other:?}").to_lowercase())),
    }
}

/// Orthonormal Hermite values `p_{n}(x)` and `p_{n-1}(x)` where
/// `p_k = He_k / √(k!)`.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// `n`-point probabilists' Gauss–Hermite rule (weights sum to one).
///
/// Nodes start from the eigenvalues of the Jacobi matrix, are polished by
/// Newton steps on `He_n`, and get Christoffel weights
/// `1 / Σ_{k<n} p_k(x)²`. The result is symmetrized about zero.
pub fn gauss_hermite_rule(n: usize) -> Result<UnivariateRule> {
    if n == 0 || n > MAX_POINTS {
        return Err(Error::Argument(format!(
            "Gauss-Hermite point count must be in 1..={MAX_POINTS}, got {n}"
        )));
    }
    if n == 1 {
        return Ok(UnivariateRule {
            nodes: vec![0.0],
            weights: vec![1.0],
        });
    }

    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    let sqrt_n = (n as f64).sqrt();
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (pn, pn1) = orthonormal_hermite(n, *x);
            let step = pn / (sqrt_n * pn1);
            *x -= step;
            if step.abs() < 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }

    // exact symmetry about zero
    for i in 0..n / 2 {
        let m = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -m;
        nodes[n - 1 - i] = m;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let mut prev = 0.0;
            let mut cur = 1.0;
            let mut acc = 1.0;
            for k in 0..n - 1 {
                let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
                prev = cur;
                cur = next;
                acc += cur * cur;
            }
            1.0 / acc
        })
        .collect();
    for i in 0..n / 2 {
        let m = 0.5 * (weights[i] + weights[n - 1 - i]);
        weights[i] = m;
        weights[n - 1 - i] = m;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    Ok(UnivariateRule { nodes, weights })
}
