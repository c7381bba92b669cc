use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::resample::{systematic_resample, ParticleSet};
use super::{ess, normalize_log_weights, InnovationMix, UpdateReport};
use crate::error::{Error, Result};
use crate::model::{ActionId, Observation, PomdpModel, State};
use crate::rng::RngStream;

/// Bootstrap particle belief over full states.
#[derive(Clone, Debug, PartialEq)]
pub struct SirBelief {
    pub particles: Vec<State>,
    pub weights: Vec<f64>,
    pub resample_threshold: f64,
    /// Standard deviation of the Gaussian jitter added to each state
    /// component after resampling. Zero disables regularization.
    pub jitter: DVector<f64>,
}

impl SirBelief {
    pub fn new(particles: Vec<State>, resample_threshold: f64, jitter: DVector<f64>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::Argument("belief needs at least one particle".into()));
        }
        if !(resample_threshold > 0.0 && resample_threshold <= 1.0) {
            return Err(Error::Argument(format!(
                "resample threshold {resample_threshold} not in (0, 1]"
            )));
        }
        if jitter.len() != particles[0].len() || jitter.iter().any(|&b| b < 0.0) {
            return Err(Error::Argument(
                "jitter must be non-negative, one entry per state component".into(),
            ));
        }
        let n = particles.len();
        Ok(Self {
            particles,
            weights: vec![1.0 / n as f64; n],
            resample_threshold,
            jitter,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn sample_index(&self, rng: &mut RngStream) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }

    pub fn mean(&self) -> DVector<f64> {
        let d = self.particles[0].len();
        self.particles
            .iter()
            .zip(&self.weights)
            .fold(DVector::zeros(d), |acc, (s, w)| acc + s * *w)
    }

    pub fn cov(&self) -> DMatrix<f64> {
        let m = self.mean();
        let d = m.len();
        self.particles
            .iter()
            .zip(&self.weights)
            .fold(DMatrix::zeros(d, d), |acc, (s, w)| {
                let e = s - &m;
                acc + &e * e.transpose() * *w
            })
    }
}

impl ParticleSet for SirBelief {
    fn weights(&self) -> Cow<'_, [f64]> {
        Cow::Borrowed(&self.weights)
    }

    fn reindex(&mut self, indices: &[usize]) {
        self.particles = indices.iter().map(|&i| self.particles[i].clone()).collect();
        self.weights = vec![1.0 / indices.len() as f64; indices.len()];
    }
}

/// One bootstrap step: propose from the transition model, weight by the
/// observation density, normalize, resample when `ess / N` drops below the
/// threshold, and jitter the resampled particles.
///
/// On error the belief is left untouched.
pub fn sirpf_update<M: PomdpModel + ?Sized>(
    belief: &mut SirBelief,
    a: ActionId,
    o: &Observation,
    model: &M,
    rng: &mut RngStream,
) -> Result<UpdateReport> {
    let n = belief.len();
    let obs_cov = model.observation_cov();
    let mut next = Vec::with_capacity(n);
    let mut log_w = Vec::with_capacity(n);
    let mut mix = obs_cov.as_ref().map(|_| InnovationMix::new(o.len()));
    let mut predicted = 0;

    for (s, w) in belief.particles.iter().zip(&belief.weights) {
        let s_next = model.sample_transition(s, a, rng);
        log_w.push(w.ln() + model.log_obs_density(o, s, a, &s_next));
        if let Some(mix) = mix.as_mut() {
            if let Some(pred) = model.observation_mean(&s_next) {
                mix.push(*w, &model.observation_residual(o, &pred));
                predicted += 1;
            }
        }
        next.push(s_next);
    }

    let weights = normalize_log_weights(&log_w)?;
    let (innovation, innovation_cov) = match (mix, obs_cov) {
        (Some(mut mix), Some(r)) if predicted == n => {
            mix.push_cov(belief.weights.iter().sum(), &r);
            mix.finish().unzip()
        }
        _ => (None, None),
    };
    let ess = ess(&weights)?;
    belief.particles = next;
    belief.weights = weights;

    let resampled = ess / (n as f64) < belief.resample_threshold;
    if resampled {
        systematic_resample(belief, rng);
        if belief.jitter.iter().any(|&b| b > 0.0) {
            for s in belief.particles.iter_mut() {
                for (x, b) in s.iter_mut().zip(belief.jitter.iter()) {
                    let z: f64 = StandardNormal.sample(rng);
                    *x += b * z;
                }
                model.canonicalize(s);
            }
        }
    }

    Ok(UpdateReport {
        ess,
        num_particles: n,
        resampled,
        innovation,
        innovation_cov,
    })
}
