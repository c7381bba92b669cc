use crate::error::{Error, Result};
use crate::filters::{RbBelief, UkfParams};
use crate::model::{ActionId, RbFactoredModel};
use crate::quadrature::MultiRule;
use crate::rng::RngStream;

use super::expectation::{expected_generative, rollout_step, NodeBelief};
use super::tree::{HistoryId, PlannerTree};
use super::{PlannerParams, RolloutPolicy, SearchOutcome};

/// UCT search over Rao-Blackwellized particles without progressive
/// widening.
///
/// A history is expanded with every action on its first visit, which
/// returns a rollout value. Each expected step yields a deterministic
/// observation given the sampled `s'^π`, so observation children are keyed
/// by exact equality. Depth runs from zero at the root and the search stops
/// once `γ^depth < ε`; `max_depth` and the widening constants are unused.
pub struct RbPomcp<'a, M: RbFactoredModel + ?Sized, P: RolloutPolicy<M> + ?Sized> {
    model: &'a M,
    policy: &'a P,
    params: PlannerParams,
    ukf: UkfParams,
    simulate_rule: MultiRule,
    rollout_rule: MultiRule,
}

impl<'a, M: RbFactoredModel + ?Sized, P: RolloutPolicy<M> + ?Sized> RbPomcp<'a, M, P> {
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

    pub fn search(&self, belief: &RbBelief, rng: &mut RngStream) -> Result<SearchOutcome<()>> {
        let mut tree = PlannerTree::new();
        let root = tree.root();
        for _ in 0..self.params.iterations {
            let p = NodeBelief::from(&belief.particles[belief.sample_index(rng)]);
            self.simulate(&mut tree, &p, root, 0, rng)?;
        }
        let action = tree
            .best_root_action()
            .or_else(|| tree.history(root).children.first().map(|c| c.action))
            .ok_or_else(|| Error::Argument("search produced no root actions".into()))?;
        Ok(SearchOutcome { action, tree })
    }

    pub fn simulate(
        &self,
        tree: &mut PlannerTree<()>,
        p: &NodeBelief,
        h: HistoryId,
        depth: usize,
        rng: &mut RngStream,
    ) -> Result<f64> {
        let model = self.model;
        let gamma = model.discount();
        if gamma.powi(depth as i32) < self.params.epsilon {
            return Ok(0.0);
        }
        if h != tree.root() && model.is_terminal(&p.mean_state(model)) {
            return Ok(model.terminal_reward());
        }
        if !tree.history(h).expanded {
            for a in 0..model.num_actions() {
                tree.add_action(h, ActionId(a));
            }
            tree.histories[h.0].expanded = true;
            return self.rollout(p, depth, rng);
        }
        let i = tree.ucb_select(h, self.params.exploration);
        let a = tree.history(h).children[i].action;
        let step = expected_generative(p, a, model, &self.simulate_rule, rng)?;
        let p_next = p.analytical_update(&step.s_pi_next, &step.observation, a, model, &self.ukf)?;

        let existing = tree.history(h).children[i]
            .branches
            .iter()
            .position(|b| b.observation == step.observation);
        let j = match existing {
            Some(j) => j,
            None => tree.add_branch(h, i, step.observation.clone()),
        };
        let branch = tree.branch_mut(h, i, j);
        branch.m += 1;
        let child = branch.child;
        let total = step.reward + gamma * self.simulate(tree, &p_next, child, depth + 1, rng)?;
        tree.backup(h, i, total);
        Ok(total)
    }

    /// Expected-step rollout from `depth` until `γ^depth < ε` or the mean
    /// state is terminal.
    pub fn rollout(&self, p: &NodeBelief, depth: usize, rng: &mut RngStream) -> Result<f64> {
        let model = self.model;
        let gamma = model.discount();
        let mut p = p.clone();
        let mut total = 0.0;
        let mut discount = 1.0;
        let mut reach = gamma.powi(depth as i32);
        while reach >= self.params.epsilon {
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
