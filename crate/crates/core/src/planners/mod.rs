//! Online tree-search planners.
//!
//! [`RbPomcpow`] and [`RbPomcp`] search over Rao-Blackwellized particles,
//! replacing sampled tractable states by quadrature expectations under each
//! particle's Gaussian. [`Pomcpow`] is the sampling baseline over full
//! states.

mod expectation;
mod pomcpow;
mod rb_pomcp;
mod rb_pomcpow;
mod tree;

pub use expectation::{expected_generative, rollout_step, ExpectedStep, NodeBelief};
pub use pomcpow::{Pomcpow, RootSampler};
pub use rb_pomcp::RbPomcp;
pub use rb_pomcpow::RbPomcpow;
pub use tree::{ActionNode, HistoryId, HistoryNode, ObsBranch, PlannerTree};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionId, PomdpModel, State};
use crate::quadrature::{gauss_hermite_rule, smolyak_rule, tensor_rule, Growth, MultiRule};
use crate::rng::RngStream;

/// Result of one planning call.
#[derive(Clone, Debug)]
pub struct SearchOutcome<S> {
    pub action: ActionId,
    pub tree: PlannerTree<S>,
}

/// How a planner integrates over a particle's tractable Gaussian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleSpec {
    /// Evaluate at the mean.
    Mean,
    /// Smolyak sparse grid at accuracy level `level ≥ 1`; level 1 is the
    /// mean-only rule and each level adds one degree of polynomial
    /// exactness per dimension.
    Smolyak { level: usize, growth: Growth },
    /// Full tensor Gauss–Hermite grid with `points` nodes per dimension.
    Tensor { points: usize },
}

impl RuleSpec {
    pub fn smolyak(level: usize) -> Self {
        RuleSpec::Smolyak {
            level,
            growth: Growth::Linear,
        }
    }

    pub fn build(&self, dim: usize) -> Result<MultiRule> {
        match *self {
            RuleSpec::Mean => Ok(MultiRule::mean_only(dim)),
            RuleSpec::Smolyak { level, growth } => {
                if level == 0 {
                    return Err(Error::Argument("sparse grid level must be at least 1".into()));
                }
                smolyak_rule(level + dim - 1, dim, growth)
            }
            RuleSpec::Tensor { points } => {
                let r = gauss_hermite_rule(points)?;
                tensor_rule(&vec![r; dim])
            }
        }
    }
}

/// Search parameters shared by all planners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    pub iterations: usize,
    pub max_depth: usize,
    /// UCB exploration constant.
    pub exploration: f64,
    /// Action widening: expand while `|C(h)| ≤ k_a N(h)^α_a`. Ignored by
    /// [`RbPomcp`], which tries every action.
    pub k_action: f64,
    pub alpha_action: f64,
    /// Observation widening: branch while `|C(ha)| ≤ k_o N(ha)^α_o`.
    pub k_obs: f64,
    pub alpha_obs: f64,
    /// Stop once `γ^depth` falls below this.
    pub epsilon: f64,
    /// Rule for the expected generative step inside the tree.
    pub simulate_rule: RuleSpec,
    /// Rule used during rollouts. The mean-only default propagates each
    /// rollout particle as a point.
    pub rollout_rule: RuleSpec,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            iterations: 50,
            max_depth: 20,
            exploration: 10.0,
            k_action: 6.0,
            alpha_action: 0.5,
            k_obs: 4.0,
            alpha_obs: 0.1,
            epsilon: 0.01,
            simulate_rule: RuleSpec::smolyak(3),
            rollout_rule: RuleSpec::Mean,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Argument(m.into()));
        if self.iterations == 0 {
            return bad("planner needs at least one iteration");
        }
        if self.max_depth == 0 {
            return bad("maximum depth must be positive");
        }
        if !(self.exploration >= 0.0) {
            return bad("exploration constant must be non-negative");
        }
        if !(self.k_action > 0.0 && self.k_obs > 0.0) {
            return bad("widening constants must be positive");
        }
        if !(0.0..=1.0).contains(&self.alpha_action) || !(0.0..=1.0).contains(&self.alpha_obs) {
            return bad("widening exponents must lie in [0, 1]");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Chooses actions during rollouts from a point estimate of the state.
pub trait RolloutPolicy<M: ?Sized>: Sync {
    fn select(&self, model: &M, state: &State, rng: &mut RngStream) -> ActionId;
}

/// Uniformly random rollout actions.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformRandom;

impl<M: PomdpModel + ?Sized> RolloutPolicy<M> for UniformRandom {
    fn select(&self, model: &M, _state: &State, rng: &mut RngStream) -> ActionId {
        ActionId(rng.random_range(0..model.num_actions()))
    }
}

/// Index drawn with probability proportional to non-negative `weights`;
/// uniform when they sum to zero.
pub(crate) fn sample_proportional<I>(weights: I, total: f64, len: usize, rng: &mut RngStream) -> usize
where
    I: IntoIterator<Item = f64>,
{
    if !(total > 0.0) || !total.is_finite() {
        return rng.random_range(0..len);
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.into_iter().enumerate() {
        acc += w;
        if w > 0.0 {
            last = i;
        }
        if u < acc {
            return i;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_levels() {
        assert_eq!(RuleSpec::smolyak(1).build(2).unwrap().len(), 1);
        assert_eq!(RuleSpec::Mean.build(3).unwrap().len(), 1);
        assert_eq!(RuleSpec::Tensor { points: 3 }.build(2).unwrap().len(), 9);
        assert!(RuleSpec::smolyak(0).build(2).is_err());
        // level 2 in 2-D integrates quadratics: origin plus the four axis points
        assert_eq!(RuleSpec::smolyak(2).build(2).unwrap().len(), 5);
    }

    #[test]
    fn zero_iterations_rejected() {
        let p = PlannerParams {
            iterations: 0,
            ..Default::default()
        };
        assert!(matches!(p.validate(), Err(Error::Argument(_))));
        PlannerParams::default().validate().unwrap();
    }

    #[test]
    fn proportional_sampling_skips_zero_weights() {
        let mut rng = RngStream::new(1);
        for _ in 0..200 {
            let i = sample_proportional([0.0, 2.0, 0.0, 1.0], 3.0, 4, &mut rng);
            assert!(i == 1 || i == 3);
        }
        let i = sample_proportional([0.0, 0.0], 0.0, 2, &mut rng);
        assert!(i < 2);
    }
}
