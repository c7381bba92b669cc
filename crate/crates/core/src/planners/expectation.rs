use nalgebra::DVector;

use crate::error::Result;
use crate::filters::{ukf_analytical_update, RbParticle, UkfParams};
use crate::model::{ActionId, Observation, RbFactoredModel, State};
use crate::quadrature::{GaussianStat, MultiRule};
use crate::rng::RngStream;

/// A single Rao-Blackwellized particle as carried down the search tree.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeBelief {
    pub s_pi: DVector<f64>,
    pub theta: GaussianStat,
}

impl NodeBelief {
    pub fn new(s_pi: DVector<f64>, theta: GaussianStat) -> Self {
        Self { s_pi, theta }
    }

    /// Point estimate `(s^π, E[s^α])`.
    pub fn mean_state<M: RbFactoredModel + ?Sized>(&self, model: &M) -> State {
        model.join(&self.s_pi, &self.theta.mean)
    }

    /// Predict/update the tractable Gaussian along the step
    /// `s^π → s_pi_next` with observation `o`.
    pub fn analytical_update<M: RbFactoredModel + ?Sized>(
        &self,
        s_pi_next: &DVector<f64>,
        o: &Observation,
        a: ActionId,
        model: &M,
        ukf: &UkfParams,
    ) -> Result<NodeBelief> {
        let upd = ukf_analytical_update(&self.theta, &self.s_pi, s_pi_next, o, a, model, ukf)?;
        Ok(NodeBelief {
            s_pi: s_pi_next.clone(),
            theta: upd.theta,
        })
    }
}

/// One rollout step from `p`: the expected reward and the next node belief.
///
/// A mean-only `rule` never reads the Gaussian's spread, so the particle is
/// carried as a point through the conditional mean dynamics and the
/// covariance update is skipped. Any other rule runs the full analytical
/// update with the expected observation.
pub fn rollout_step<M: RbFactoredModel + ?Sized>(
    p: &NodeBelief,
    a: ActionId,
    model: &M,
    rule: &MultiRule,
    ukf: &UkfParams,
    rng: &mut RngStream,
) -> Result<(f64, NodeBelief)> {
    let step = expected_generative(p, a, model, rule, rng)?;
    let next = if rule.is_mean_only() {
        NodeBelief {
            theta: GaussianStat::new_unchecked(step.s_alpha_next, p.theta.cov.clone()),
            s_pi: step.s_pi_next,
        }
    } else {
        p.analytical_update(&step.s_pi_next, &step.observation, a, model, ukf)?
    };
    Ok((step.reward, next))
}

impl From<&RbParticle> for NodeBelief {
    fn from(p: &RbParticle) -> Self {
        Self {
            s_pi: p.s_pi.clone(),
            theta: p.theta.clone(),
        }
    }
}

/// Output of one expected generative step.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedStep {
    /// Sampled `s'^π`.
    pub s_pi_next: DVector<f64>,
    /// Quadrature estimate of `E[s'^α]`.
    pub s_alpha_next: DVector<f64>,
    /// Noise-free observation at `(s'^π, E[s'^α])`.
    pub observation: Observation,
    /// Quadrature estimate of `E[R(s, a)]` over the particle's Gaussian.
    pub reward: f64,
}

impl ExpectedStep {
    pub fn next_state<M: RbFactoredModel + ?Sized>(&self, model: &M) -> State {
        model.join(&self.s_pi_next, &self.s_alpha_next)
    }
}

/// `E[G(p, a)]`: samples `s'^π`, then integrates the conditional dynamics
/// and the reward over the particle's tractable Gaussian with `rule`.
pub fn expected_generative<M: RbFactoredModel + ?Sized>(
    p: &NodeBelief,
    a: ActionId,
    model: &M,
    rule: &MultiRule,
    rng: &mut RngStream,
) -> Result<ExpectedStep> {
    let s_pi_next = model.sample_pi_transition(&p.s_pi, a, rng);
    if rule.is_mean_only() {
        let s_alpha_next = model.tractable_dynamics(&p.theta.mean, &p.s_pi, &s_pi_next, a);
        let reward = model.step_reward(&model.join(&p.s_pi, &p.theta.mean), a);
        let observation = model.observe_tractable(&s_alpha_next, &s_pi_next);
        return Ok(ExpectedStep {
            s_pi_next,
            s_alpha_next,
            observation,
            reward,
        });
    }
    let nodes = p.theta.placed_nodes(rule)?;
    let mut s_alpha_next = DVector::zeros(p.theta.dim());
    let mut reward = 0.0;
    for (x, w) in nodes.iter().zip(rule.weights()) {
        s_alpha_next += model.tractable_dynamics(x, &p.s_pi, &s_pi_next, a) * *w;
        reward += w * model.step_reward(&model.join(&p.s_pi, x), a);
    }
    let observation = model.observe_tractable(&s_alpha_next, &s_pi_next);
    Ok(ExpectedStep {
        s_pi_next,
        s_alpha_next,
        observation,
        reward,
    })
}
