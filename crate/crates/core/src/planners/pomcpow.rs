use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::filters::{RbBelief, SirBelief};
use crate::model::{PomdpModel, RbFactoredModel, State};
use crate::rng::RngStream;

use super::tree::{HistoryId, PlannerTree};
use super::{sample_proportional, PlannerParams, RolloutPolicy, SearchOutcome};

/// Draws full root states for the sampling planner.
pub trait RootSampler<M: ?Sized> {
    fn sample_state(&self, model: &M, rng: &mut RngStream) -> State;
}

impl<M: PomdpModel + ?Sized> RootSampler<M> for SirBelief {
    fn sample_state(&self, _model: &M, rng: &mut RngStream) -> State {
        self.particles[self.sample_index(rng)].clone()
    }
}

/// Picks a particle by weight, then draws its tractable block from the
/// particle's Gaussian.
impl<M: RbFactoredModel + ?Sized> RootSampler<M> for RbBelief {
    fn sample_state(&self, model: &M, rng: &mut RngStream) -> State {
        let p = &self.particles[self.sample_index(rng)];
        let z = DVector::from_fn(p.theta.dim(), |_, _| StandardNormal.sample(rng));
        let s_alpha = &p.theta.mean + p.theta.sqrt_factor() * z;
        let mut s = model.join(&p.s_pi, &s_alpha);
        model.canonicalize(&mut s);
        s
    }
}

/// Progressive-widening tree search over sampled full states.
pub struct Pomcpow<'a, M: PomdpModel + ?Sized, P: RolloutPolicy<M> + ?Sized> {
    model: &'a M,
    policy: &'a P,
    params: PlannerParams,
}

impl<'a, M: PomdpModel + ?Sized, P: RolloutPolicy<M> + ?Sized> Pomcpow<'a, M, P> {
    pub fn new(model: &'a M, policy: &'a P, params: PlannerParams) -> Result<Self> {
        params.validate()?;
        model.validate()?;
        Ok(Self { model, policy, params })
    }

    pub fn params(&self) -> &PlannerParams {
        &self.params
    }

    pub fn search<B: RootSampler<M> + ?Sized>(&self, belief: &B, rng: &mut RngStream) -> Result<SearchOutcome<State>> {
        let mut tree = PlannerTree::new();
        let root = tree.root();
        for _ in 0..self.params.iterations {
            let s = belief.sample_state(self.model, rng);
            self.simulate(&mut tree, &s, root, self.params.max_depth, rng)?;
        }
        let action = tree
            .best_root_action()
            .ok_or_else(|| Error::Argument("search produced no root actions".into()))?;
        Ok(SearchOutcome { action, tree })
    }

    pub fn simulate(
        &self,
        tree: &mut PlannerTree<State>,
        s: &State,
        h: HistoryId,
        d: usize,
        rng: &mut RngStream,
    ) -> Result<f64> {
        let model = self.model;
        if d == 0 {
            return Ok(0.0);
        }
        if h != tree.root() && model.is_terminal(s) {
            return Ok(model.terminal_reward());
        }
        let i = tree.widen_and_select(h, model.num_actions(), &self.params);
        let a = tree.history(h).children[i].action;
        let r = model.step_reward(s, a);
        let s_next = model.sample_transition(s, a, rng);

        let node = &tree.history(h).children[i];
        let widen = node.branches.len() as f64 <= self.params.k_obs * (node.n as f64).powf(self.params.alpha_obs);
        let j = if widen {
            let o = model.sample_observation(&s_next, a, rng)?;
            tree.add_branch(h, i, o)
        } else {
            let b = &node.branches;
            let total: u64 = b.iter().map(|x| x.m).sum();
            sample_proportional(b.iter().map(|x| x.m as f64), total as f64, b.len(), rng)
        };
        let branch = tree.branch_mut(h, i, j);
        branch.m += 1;
        let z = model.obs_density(&branch.observation, s, a, &s_next);
        branch.states.push((s_next.clone(), r));
        branch.weights.push(z);

        let gamma = model.discount();
        let depth = self.params.max_depth - d;
        let total = if widen {
            r + gamma * self.rollout(&s_next, depth + 1, d - 1, rng)
        } else {
            let child = branch.child;
            let w_total: f64 = branch.weights.iter().sum();
            let k = sample_proportional(branch.weights.iter().copied(), w_total, branch.weights.len(), rng);
            let (s_sel, r_sel) = branch.states[k].clone();
            r_sel + gamma * self.simulate(tree, &s_sel, child, d - 1, rng)?
        };
        tree.backup(h, i, total);
        Ok(total)
    }

    /// Sampled rollout from `s`, `depth` steps below the root, for at most
    /// `remaining` steps.
    pub fn rollout(&self, s: &State, depth: usize, remaining: usize, rng: &mut RngStream) -> f64 {
        let model = self.model;
        let gamma = model.discount();
        let mut s = s.clone();
        let mut total = 0.0;
        let mut discount = 1.0;
        let mut reach = gamma.powi(depth as i32);
        for _ in 0..remaining {
            if reach < self.params.epsilon {
                break;
            }
            if model.is_terminal(&s) {
                total += discount * model.terminal_reward();
                break;
            }
            let a = self.policy.select(model, &s, rng);
            total += discount * model.reward(&s, a);
            s = model.sample_transition(&s, a, rng);
            discount *= gamma;
            reach *= gamma;
        }
        total
    }
}
