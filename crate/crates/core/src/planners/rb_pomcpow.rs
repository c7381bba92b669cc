use crate::error::{Error, Result};
use crate::filters::{RbBelief, UkfParams};
use crate::model::{RbFactoredModel, State};
use crate::quadrature::MultiRule;
use crate::rng::RngStream;

use super::expectation::{expected_generative, rollout_step, NodeBelief};
use super::tree::{HistoryId, PlannerTree};
use super::{sample_proportional, PlannerParams, RolloutPolicy, SearchOutcome};

/// Progressive-widening tree search over Rao-Blackwellized particles.
///
/// Each simulation draws one particle from the root belief and descends
/// with expected generative steps: `s'^π` is sampled, while the tractable
/// block, the observation and the reward come from quadrature over the
/// particle's Gaussian. Observation branches store `(ŝ', r̂)` pairs weighted
/// by the observation density; revisiting a branch resamples one of them
/// and runs the UKF update against the branch's observation.
pub struct RbPomcpow<'a, M: RbFactoredModel + ?Sized, P: RolloutPolicy<M> + ?Sized> {
    model: &'a M,
    policy: &'a P,
    params: PlannerParams,
    ukf: UkfParams,
    simulate_rule: MultiRule,
    rollout_rule: MultiRule,
}

impl<'a, M: RbFactoredModel + ?Sized, P: RolloutPolicy<M> + ?Sized> RbPomcpow<'a, M, P> {
    pub fn new(model: &'a M, policy: &'a P, params: PlannerParams, ukf: UkfParams) -> Result<Self> {
        params.validate()?;
        ukf.validate()?;
        model.validate()?;
        let d = model.alpha_dim();
        Ok(Self {
            model,
            policy,
            params,
            ukf,
            simulate_rule: params.simulate_rule.build(d)?,
            rollout_rule: params.rollout_rule.build(d)?,
        })
    }

    pub fn params(&self) -> &PlannerParams {
        &self.params
    }

    /// Runs `iterations` simulations from particles drawn out of `belief`
    /// and returns the root action with the highest value estimate.
    pub fn search(&self, belief: &RbBelief, rng: &mut RngStream) -> Result<SearchOutcome<State>> {
        let mut tree = PlannerTree::new();
        let root = tree.root();
        for _ in 0..self.params.iterations {
            let p = NodeBelief::from(&belief.particles[belief.sample_index(rng)]);
            self.simulate(&mut tree, &p, root, self.params.max_depth, rng)?;
        }
        let action = tree
            .best_root_action()
            .ok_or_else(|| Error::Argument("search produced no root actions".into()))?;
        Ok(SearchOutcome { action, tree })
    }

    /// One simulation from history `h` with `d` steps of depth left.
    /// Returns the discounted return backed up into `h`.
    pub fn simulate(
        &self,
        tree: &mut PlannerTree<State>,
        p: &NodeBelief,
        h: HistoryId,
        d: usize,
        rng: &mut RngStream,
    ) -> Result<f64> {
        let model = self.model;
        if d == 0 {
            return Ok(0.0);
        }
        let s_hat = p.mean_state(model);
        if h != tree.root() && model.is_terminal(&s_hat) {
            return Ok(model.terminal_reward());
        }
        let i = tree.widen_and_select(h, model.num_actions(), &self.params);
        let a = tree.history(h).children[i].action;
        let step = expected_generative(p, a, model, &self.simulate_rule, rng)?;
        let s_next = step.next_state(model);

        let node = &tree.history(h).children[i];
        let widen = node.branches.len() as f64 <= self.params.k_obs * (node.n as f64).powf(self.params.alpha_obs);
        let j = if widen {
            tree.add_branch(h, i, step.observation.clone())
        } else {
            let b = &node.branches;
            let total: u64 = b.iter().map(|x| x.m).sum();
            sample_proportional(b.iter().map(|x| x.m as f64), total as f64, b.len(), rng)
        };
        let branch = tree.branch_mut(h, i, j);
        branch.m += 1;
        let z = model.obs_density(&branch.observation, &s_hat, a, &s_next);
        branch.states.push((s_next, step.reward));
        branch.weights.push(z);

        let gamma = model.discount();
        let depth = self.params.max_depth - d;
        let total = if widen {
            let p_next = p.analytical_update(&step.s_pi_next, &step.observation, a, model, &self.ukf)?;
            step.reward + gamma * self.rollout(&p_next, depth + 1, d - 1, rng)?
        } else {
            let child = branch.child;
            let o = branch.observation.clone();
            let w_total: f64 = branch.weights.iter().sum();
            let k = sample_proportional(branch.weights.iter().copied(), w_total, branch.weights.len(), rng);
            let (s_sel, r_sel) = branch.states[k].clone();
            let (s_pi_sel, _) = model.split(&s_sel);
            let p_next = p.analytical_update(&s_pi_sel, &o, a, model, &self.ukf)?;
            r_sel + gamma * self.simulate(tree, &p_next, child, d - 1, rng)?
        };
        tree.backup(h, i, total);
        Ok(total)
    }

    /// Expected-step rollout from `p`, which sits `depth` steps below the
    /// root, for at most `remaining` steps. Stops early once `γ^depth < ε`
    /// or the mean state is terminal.
    pub fn rollout(&self, p: &NodeBelief, depth: usize, remaining: usize, rng: &mut RngStream) -> Result<f64> {
        let model = self.model;
        let gamma = model.discount();
        let mut p = p.clone();
        let mut total = 0.0;
        let mut discount = 1.0;
        let mut reach = gamma.powi(depth as i32);
        for _ in 0..remaining {
            if reach < self.params.epsilon {
                break;
            }
            let s = p.mean_state(model);
            if model.is_terminal(&s) {
                total += discount * model.terminal_reward();
                break;
            }
            let a = self.policy.select(model, &s, rng);
            let (reward, next) = rollout_step(&p, a, model, &self.rollout_rule, &self.ukf, rng)?;
            total += discount * reward;
            p = next;
            discount *= gamma;
            reach *= gamma;
        }
        Ok(total)
    }
}
