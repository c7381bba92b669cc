use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::resample::{systematic_resample, ParticleSet};
use super::ukf::{ukf_analytical_update, UkfParams};
use super::{ess, normalize_log_weights, InnovationMix, UpdateReport};
use crate::error::{Error, Result};
use crate::model::{ActionId, Observation, RbFactoredModel};
use crate::quadrature::GaussianStat;
use crate::rng::RngStream;

/// A sampled `s^π` carrying a Gaussian over the tractable block.
#[derive(Clone, Debug, PartialEq)]
pub struct RbParticle {
    pub s_pi: DVector<f64>,
    pub theta: GaussianStat,
    pub weight: f64,
}

/// Rao-Blackwellized particle belief.
#[derive(Clone, Debug, PartialEq)]
pub struct RbBelief {
    pub particles: Vec<RbParticle>,
    /// Resample when `ess / N` falls below this.
    pub resample_threshold: f64,
    pub ukf: UkfParams,
}

impl RbBelief {
    /// Builds an equally weighted belief.
    pub fn new(particles: Vec<(DVector<f64>, GaussianStat)>, resample_threshold: f64, ukf: UkfParams) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::Argument("belief needs at least one particle".into()));
        }
        if !(resample_threshold > 0.0 && resample_threshold <= 1.0) {
            return Err(Error::Argument(format!(
                "resample threshold {resample_threshold} not in (0, 1]"
            )));
        }
        ukf.validate()?;
        let w = 1.0 / particles.len() as f64;
        Ok(Self {
            particles: particles
                .into_iter()
                .map(|(s_pi, theta)| RbParticle { s_pi, theta, weight: w })
                .collect(),
            resample_threshold,
            ukf,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Draws a particle index with probability proportional to weight.
    pub fn sample_index(&self, rng: &mut RngStream) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.particles.iter().enumerate() {
            acc += p.weight;
            if u < acc {
                return i;
            }
        }
        self.particles.len() - 1
    }

    /// Weighted mean of the tractable block.
    pub fn tractable_mean(&self) -> DVector<f64> {
        let d = self.particles[0].theta.dim();
        self.particles
            .iter()
            .fold(DVector::zeros(d), |acc, p| acc + &p.theta.mean * p.weight)
    }

    /// Mixture covariance of the tractable block.
    pub fn tractable_cov(&self) -> DMatrix<f64> {
        let mean = self.tractable_mean();
        let d = mean.len();
        self.particles.iter().fold(DMatrix::zeros(d, d), |acc, p| {
            let e = &p.theta.mean - &mean;
            acc + (&p.theta.cov + &e * e.transpose()) * p.weight
        })
    }
}

impl ParticleSet for RbBelief {
    fn weights(&self) -> Cow<'_, [f64]> {
        Cow::Owned(self.particles.iter().map(|p| p.weight).collect())
    }

    fn reindex(&mut self, indices: &[usize]) {
        let w = 1.0 / indices.len() as f64;
        self.particles = indices
            .iter()
            .map(|&i| RbParticle {
                weight: w,
                ..self.particles[i].clone()
            })
            .collect();
    }
}

/// One RBPF step: propagate each `s^π` by the π-transition, run the UKF on
/// its tractable Gaussian, reweight by the innovation likelihood alone,
/// normalize, and resample when `ess / N` drops below the threshold.
///
/// On error the belief is left untouched.
pub fn rbpf_update<M: RbFactoredModel + ?Sized>(
    belief: &mut RbBelief,
    a: ActionId,
    o: &Observation,
    model: &M,
    rng: &mut RngStream,
) -> Result<UpdateReport> {
    let n = belief.len();
    let mut next = Vec::with_capacity(n);
    let mut log_w = Vec::with_capacity(n);
    let mut mix = InnovationMix::new(o.len());

    for p in &belief.particles {
        let s_pi_next = model.sample_pi_transition(&p.s_pi, a, rng);
        let upd = ukf_analytical_update(&p.theta, &p.s_pi, &s_pi_next, o, a, model, &belief.ukf)?;
        log_w.push(p.weight.ln() + upd.loglik);
        mix.push(p.weight, &upd.innovation);
        mix.push_cov(p.weight, &upd.innovation_cov);
        next.push(RbParticle {
            s_pi: s_pi_next,
            theta: upd.theta,
            weight: 0.0,
        });
    }

    let weights = normalize_log_weights(&log_w)?;
    let (innovation, innovation_cov) = mix.finish().unzip();
    for (p, w) in next.iter_mut().zip(&weights) {
        p.weight = *w;
    }
    let ess = ess(&weights)?;
    belief.particles = next;

    let resampled = ess / (n as f64) < belief.resample_threshold;
    if resampled {
        systematic_resample(belief, rng);
    }

    Ok(UpdateReport {
        ess,
        num_particles: n,
        resampled,
        innovation,
        innovation_cov,
    })
}
