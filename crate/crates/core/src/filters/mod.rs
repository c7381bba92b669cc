//! Belief updaters.
//!
//! [`rbpf_update`] samples only the non-tractable block and carries a
//! UKF-maintained Gaussian over the tractable block per particle. The
//! bootstrap filter [`sirpf_update`] samples full states. Both keep weights
//! normalized after every update and resample systematically once the
//! normalized effective sample size drops below the belief's threshold.

mod consistency;
mod rbpf;
mod resample;
mod sir;
mod ukf;

pub use consistency::{nees, nis, ConsistencyStats};
pub use rbpf::{rbpf_update, RbBelief, RbParticle};
pub use resample::{systematic_indices, systematic_resample, ParticleSet};
pub use sir::{sirpf_update, SirBelief};
pub use ukf::{ukf_analytical_update, AnalyticUpdate, UkfParams};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default resampling threshold on `ess / N`.
pub const DEFAULT_RESAMPLE_THRESHOLD: f64 = 0.5;

/// Effective sample size `1 / Σ wᵢ²` of normalized weights.
pub fn ess(weights: &[f64]) -> Result<f64> {
    let s: f64 = weights.iter().map(|w| w * w).sum();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::DegenerateBelief);
    }
    Ok(1.0 / s)
}

/// Turns log-weights into normalized weights by max-subtraction.
/// Fails only when every log-weight is `-∞` (or NaN).
pub(crate) fn normalize_log_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    let max = log_w
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::DegenerateBelief);
    }
    let mut w: Vec<f64> = log_w
        .iter()
        .map(|&l| if l.is_nan() { 0.0 } else { (l - max).exp() })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Summary of one belief update.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateReport {
    /// Effective sample size after reweighting, before any resampling.
    pub ess: f64,
    pub num_particles: usize,
    pub resampled: bool,
    /// Prior-weighted mean innovation, when the model exposes a predicted
    /// observation.
    pub innovation: Option<DVector<f64>>,
    /// Covariance of the predicted observation around its mean.
    pub innovation_cov: Option<DMatrix<f64>>,
}

impl UpdateReport {
    pub fn ess_normalized(&self) -> f64 {
        self.ess / self.num_particles as f64
    }

    /// Normalized innovation squared of this step, if computable.
    pub fn nis(&self) -> Option<ConsistencyStats> {
        match (&self.innovation, &self.innovation_cov) {
            (Some(v), Some(s)) => nis(v, s).ok(),
            _ => None,
        }
    }
}

/// Streaming weighted mixture of innovations `(νᵢ, Sᵢ)` into one mean and
/// covariance. Moments are taken about the first innovation to keep the
/// second-moment subtraction well conditioned.
pub(crate) struct InnovationMix {
    reference: Option<DVector<f64>>,
    weight: f64,
    first: DVector<f64>,
    second: DMatrix<f64>,
    noise: DMatrix<f64>,
    d: DVector<f64>,
}

impl InnovationMix {
    pub(crate) fn new(m: usize) -> Self {
        Self {
            reference: None,
            weight: 0.0,
            first: DVector::zeros(m),
            second: DMatrix::zeros(m, m),
            noise: DMatrix::zeros(m, m),
            d: DVector::zeros(m),
        }
    }

    /// Adds `w νᵢ` to the mixture.
    pub(crate) fn push(&mut self, w: f64, innovation: &DVector<f64>) {
        let r = self.reference.get_or_insert_with(|| innovation.clone());
        self.d.copy_from(innovation);
        self.d -= &*r;
        self.weight += w;
        self.first.axpy(w, &self.d, 1.0);
        self.second.ger(w, &self.d, &self.d, 1.0);
    }

    /// Adds `w Sᵢ` to the within-component covariance.
    pub(crate) fn push_cov(&mut self, w: f64, s: &DMatrix<f64>) {
        self.noise.zip_apply(s, |n, v| *n += w * v);
    }

    /// Mean and covariance normalized by the total pushed weight, or
    /// `None` if nothing was pushed.
    pub(crate) fn finish(self) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let r = self.reference?;
        let shift = self.first / self.weight;
        let mut cov = (self.noise + self.second) / self.weight;
        cov.ger(-1.0, &shift, &shift, 1.0);
        Some((r + shift, cov))
    }
}
