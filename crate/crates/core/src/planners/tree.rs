use crate::model::{ActionId, Observation};

use super::PlannerParams;

/// Index of a history node in a [`PlannerTree`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HistoryId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryNode<S = ()> {
    /// Visit count `N(h)`.
    pub n: u64,
    /// Action children `C(h)`, in insertion order.
    pub children: Vec<ActionNode<S>>,
    /// Set once every action has been added (or on first visit for
    /// planners that expand all actions at once).
    pub expanded: bool,
}

impl<S> Default for HistoryNode<S> {
    fn default() -> Self {
        Self {
            n: 0,
            children: Vec::new(),
            expanded: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionNode<S = ()> {
    pub action: ActionId,
    /// Visit count `N(ha)`.
    pub n: u64,
    /// Running mean `Q(ha)` of backed-up returns.
    pub q: f64,
    /// Plain sum of backed-up returns, kept as a cross-check on `q`.
    pub value_sum: f64,
    /// Observation children `C(ha)`.
    pub branches: Vec<ObsBranch<S>>,
}

/// An observation child `hao` with its visit count `M(hao)` and the
/// `(s', r)` pairs `B(hao)` generated into it, weighted by `W(hao)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObsBranch<S = ()> {
    pub observation: Observation,
    pub child: HistoryId,
    pub m: u64,
    pub states: Vec<(S, f64)>,
    pub weights: Vec<f64>,
}

/// Search tree stored as an arena of history nodes. Each history owns its
/// action children, which own their observation branches. `S` is whatever
/// a branch stores as the next-state part of `B(hao)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannerTree<S = ()> {
    pub histories: Vec<HistoryNode<S>>,
}

impl<S> Default for PlannerTree<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S> PlannerTree<S> {
    /// A tree holding only the root history.
    pub fn new() -> Self {
        Self {
            histories: vec![HistoryNode::default()],
        }
    }

    pub fn root(&self) -> HistoryId {
        HistoryId(0)
    }

    pub fn len(&self) -> usize {
        self.histories.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn history(&self, h: HistoryId) -> &HistoryNode<S> {
        &self.histories[h.0]
    }

    /// Observation branches of the `i`-th action child of `h`.
    pub fn obs_branches(&self, h: HistoryId, i: usize) -> &[ObsBranch<S>] {
        &self.histories[h.0].children[i].branches
    }

    pub(crate) fn branch_mut(&mut self, h: HistoryId, i: usize, j: usize) -> &mut ObsBranch<S> {
        &mut self.histories[h.0].children[i].branches[j]
    }

    pub(crate) fn new_history(&mut self) -> HistoryId {
        self.histories.push(HistoryNode::default());
        HistoryId(self.histories.len() - 1)
    }

    pub(crate) fn add_action(&mut self, h: HistoryId, action: ActionId) -> usize {
        let node = &mut self.histories[h.0];
        node.children.push(ActionNode {
            action,
            n: 0,
            q: 0.0,
            value_sum: 0.0,
            branches: Vec::new(),
        });
        node.children.len() - 1
    }

    /// Adds a new observation branch under `(h, i)` and returns its index.
    pub(crate) fn add_branch(&mut self, h: HistoryId, i: usize, observation: Observation) -> usize {
        let child = self.new_history();
        let list = &mut self.histories[h.0].children[i].branches;
        list.push(ObsBranch {
            observation,
            child,
            m: 0,
            states: Vec::new(),
            weights: Vec::new(),
        });
        list.len() - 1
    }

    /// Progressive widening on actions: while `|C(h)| ≤ k_a N(h)^α_a` and
    /// some action is untried, add the next one in list order. Then pick the
    /// child maximising `Q + c √(ln N(h) / N(ha))`; unvisited children win,
    /// ties go to the earliest child.
    pub(crate) fn widen_and_select(&mut self, h: HistoryId, num_actions: usize, params: &PlannerParams) -> usize {
        let node = &self.histories[h.0];
        let limit = params.k_action * (node.n as f64).powf(params.alpha_action);
        if !node.expanded && node.children.len() as f64 <= limit {
            let next = node.children.len();
            self.add_action(h, ActionId(next));
            if next + 1 == num_actions {
                self.histories[h.0].expanded = true;
            }
        }
        self.ucb_select(h, params.exploration)
    }

    /// UCB choice among existing children of `h`.
    pub(crate) fn ucb_select(&self, h: HistoryId, c: f64) -> usize {
        let node = &self.histories[h.0];
        let log_n = (node.n.max(1) as f64).ln();
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, child) in node.children.iter().enumerate() {
            let score = if child.n == 0 {
                f64::INFINITY
            } else {
                child.q + c * (log_n / child.n as f64).sqrt()
            };
            if score > best.0 {
                best = (score, i);
            }
        }
        best.1
    }

    /// Records one return backed up through `(h, i)`.
    pub(crate) fn backup(&mut self, h: HistoryId, i: usize, total: f64) {
        let node = &mut self.histories[h.0];
        node.n += 1;
        let child = &mut node.children[i];
        child.n += 1;
        child.q += (total - child.q) / child.n as f64;
        child.value_sum += total;
    }

    /// Root child with the highest `Q`; ties go to the lowest action index.
    pub fn best_root_action(&self) -> Option<ActionId> {
        let root = &self.histories[0];
        let mut best: Option<(f64, ActionId)> = None;
        for c in root.children.iter().filter(|c| c.n > 0) {
            best = match best {
                Some((q, a)) if q > c.q || (q == c.q && a < c.action) => Some((q, a)),
                _ => Some((c.q, c.action)),
            };
        }
        best.map(|(_, a)| a)
    }

    /// Checks the structural invariants of a widened tree:
    /// `N(h) = Σ N(ha)` for every non-leaf history, `Σ M(hao) = N(ha)`,
    /// both widening bounds, `|B| = |W|`, and that `Q` is the running mean
    /// of the recorded returns.
    pub fn check_invariants(&self, params: &PlannerParams, widened_actions: bool) -> Result<(), String> {
        for (hi, node) in self.histories.iter().enumerate() {
            let child_visits: u64 = node.children.iter().map(|c| c.n).sum();
            if !node.children.is_empty() && child_visits != node.n {
                return Err(format!("history {hi}: N(h) = {} but Σ N(ha) = {child_visits}", node.n));
            }
            if widened_actions {
                // a child is added before the visit that increments N(h)
                let before = node.n.saturating_sub(1) as f64;
                let bound = params.k_action * before.powf(params.alpha_action) + 1.0;
                if node.children.len() as f64 > bound.max(1.0) {
                    return Err(format!(
                        "history {hi}: {} actions exceed widening bound",
                        node.children.len()
                    ));
                }
            }
            for (ai, a) in node.children.iter().enumerate() {
                let branches = &a.branches;
                let m_total: u64 = branches.iter().map(|b| b.m).sum();
                if m_total != a.n {
                    return Err(format!("history {hi} action {ai}: Σ M = {m_total} but N(ha) = {}", a.n));
                }
                let before = a.n.saturating_sub(1) as f64;
                let bound = params.k_obs * before.powf(params.alpha_obs) + 1.0;
                if widened_actions && branches.len() as f64 > bound.max(1.0) {
                    return Err(format!(
                        "history {hi} action {ai}: {} branches exceed widening bound",
                        branches.len()
                    ));
                }
                for b in branches {
                    if b.states.len() != b.weights.len() {
                        return Err(format!("history {hi} action {ai}: |B| != |W|"));
                    }
                }
                if a.n > 0 {
                    let mean = a.value_sum / a.n as f64;
                    if (mean - a.q).abs() > 1e-9 * mean.abs().max(1.0) {
                        return Err(format!(
                            "history {hi} action {ai}: Q = {} but mean return = {mean}",
                            a.q
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}
