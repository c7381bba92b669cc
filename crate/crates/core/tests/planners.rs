use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rbpomdp::filters::{RbBelief, SirBelief, UkfParams};
use rbpomdp::planners::{NodeBelief, PlannerParams, PlannerTree, Pomcpow, RbPomcp, RbPomcpow, RuleSpec, UniformRandom};
use rbpomdp::quadrature::GaussianStat;
use rbpomdp::testbed::{ConstantRewardChain, LinearGaussianModel};
use rbpomdp::{ActionId, RngStream};

fn chain_belief(n: usize, var: f64) -> RbBelief {
    let theta = GaussianStat::new(DVector::zeros(1), DMatrix::identity(1, 1) * var).unwrap();
    RbBelief::new(
        (0..n).map(|_| (DVector::zeros(1), theta.clone())).collect(),
        0.5,
        UkfParams::default(),
    )
    .unwrap()
}

fn geometric(r: f64, gamma: f64, steps: i32) -> f64 {
    r * (1.0 - gamma.powi(steps)) / (1.0 - gamma)
}

#[test]
fn rb_pomcpow_single_action_value_is_geometric_series() {
    let m = ConstantRewardChain::new(vec![2.0], 0.9);
    let params = PlannerParams {
        iterations: 300,
        max_depth: 10,
        k_action: 1.0,
        ..Default::default()
    };
    let planner = RbPomcpow::new(&m, &UniformRandom, params, UkfParams::default()).unwrap();
    let out = planner.search(&chain_belief(10, 1.0), &mut RngStream::new(3)).unwrap();
    let root = &out.tree.history(out.tree.root()).children[0];
    assert_eq!(root.n, 300);
    assert!((root.q - geometric(2.0, 0.9, 10)).abs() < 1e-9, "{}", root.q);
}

#[test]
fn rb_pomcp_single_action_value_is_geometric_series() {
    let m = ConstantRewardChain::new(vec![2.0], 0.9);
    let params = PlannerParams {
        iterations: 300,
        ..Default::default()
    };
    let planner = RbPomcp::new(&m, &UniformRandom, params, UkfParams::default()).unwrap();
    let out = planner.search(&chain_belief(10, 1.0), &mut RngStream::new(3)).unwrap();
    // first depth with 0.9^D < 0.01
    let horizon = (0..).find(|&k| 0.9f64.powi(k) < 0.01).unwrap();
    let root = &out.tree.history(out.tree.root()).children[0];
    assert!((root.q - geometric(2.0, 0.9, horizon)).abs() < 1e-9, "{}", root.q);
}

#[test]
fn pomcpow_single_action_value_is_geometric_series() {
    let m = ConstantRewardChain::new(vec![-1.5], 0.95);
    let params = PlannerParams {
        iterations: 300,
        max_depth: 15,
        ..Default::default()
    };
    let belief = SirBelief::new(vec![DVector::zeros(2); 5], 0.5, DVector::zeros(2)).unwrap();
    let planner = Pomcpow::new(&m, &UniformRandom, params).unwrap();
    let out = planner.search(&belief, &mut RngStream::new(8)).unwrap();
    let root = &out.tree.history(out.tree.root()).children[0];
    assert!((root.q - geometric(-1.5, 0.95, 15)).abs() < 1e-9);
}

#[test]
fn depth_two_return_is_reward_plus_discounted_reward() {
    let m = ConstantRewardChain::new(vec![1.0], 0.5);
    let params = PlannerParams {
        iterations: 1,
        max_depth: 2,
        ..Default::default()
    };
    let planner = RbPomcpow::new(&m, &UniformRandom, params, UkfParams::default()).unwrap();
    let mut tree = PlannerTree::new();
    let p = NodeBelief::new(DVector::zeros(1), GaussianStat::dirac(DVector::zeros(1)));
    let root = tree.root();
    let total = planner
        .simulate(&mut tree, &p, root, 2, &mut RngStream::new(0))
        .unwrap();
    assert!((total - 1.5).abs() < 1e-12);
    assert_eq!(
        planner
            .simulate(&mut tree, &p, root, 0, &mut RngStream::new(0))
            .unwrap(),
        0.0
    );
}

#[test]
fn rollout_past_discount_horizon_is_zero() {
    let m = ConstantRewardChain::new(vec![1.0], 0.5);
    let planner = RbPomcpow::new(&m, &UniformRandom, PlannerParams::default(), UkfParams::default()).unwrap();
    let p = NodeBelief::new(DVector::zeros(1), GaussianStat::dirac(DVector::zeros(1)));
    // 0.5^7 < 0.01
    assert_eq!(planner.rollout(&p, 7, 10, &mut RngStream::new(0)).unwrap(), 0.0);
    assert!((planner.rollout(&p, 0, 3, &mut RngStream::new(0)).unwrap() - 1.75).abs() < 1e-12);
}

#[test]
fn planners_pick_the_best_constant_action() {
    let m = ConstantRewardChain::new(vec![1.0, 3.0, 2.0], 0.9);
    let params = PlannerParams {
        iterations: 200,
        max_depth: 5,
        k_action: 3.0,
        simulate_rule: RuleSpec::Mean,
        rollout_rule: RuleSpec::Mean,
        ..Default::default()
    };
    let rb = RbPomcpow::new(&m, &UniformRandom, params, UkfParams::default()).unwrap();
    let rb_action = rb.search(&chain_belief(5, 0.0), &mut RngStream::new(1)).unwrap().action;
    let sir = SirBelief::new(vec![DVector::zeros(2); 5], 0.5, DVector::zeros(2)).unwrap();
    let base = Pomcpow::new(&m, &UniformRandom, params).unwrap();
    let base_action = base.search(&sir, &mut RngStream::new(1)).unwrap().action;
    assert_eq!(rb_action, ActionId(1));
    assert_eq!(base_action, rb_action);
    let pomcp = RbPomcp::new(&m, &UniformRandom, params, UkfParams::default()).unwrap();
    assert_eq!(
        pomcp
            .search(&chain_belief(5, 0.0), &mut RngStream::new(1))
            .unwrap()
            .action,
        ActionId(1)
    );
}

fn linear_belief(n: usize, rng: &mut RngStream) -> RbBelief {
    use rand_distr::{Distribution, StandardNormal};
    let theta = GaussianStat::new(DVector::from_vec(vec![0.5, -0.5]), DMatrix::identity(2, 2) * 0.3).unwrap();
    RbBelief::new(
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                (DVector::from_element(1, 0.2 * z), theta.clone())
            })
            .collect(),
        0.5,
        UkfParams::default(),
    )
    .unwrap()
}

#[test]
fn search_is_deterministic_per_seed() {
    let m = LinearGaussianModel::standard();
    let params = PlannerParams {
        iterations: 100,
        max_depth: 8,
        k_action: 2.0,
        ..Default::default()
    };
    let planner = RbPomcpow::new(&m, &UniformRandom, params, UkfParams::default()).unwrap();
    let belief = linear_belief(20, &mut RngStream::new(0));
    let a = planner.search(&belief, &mut RngStream::new(99)).unwrap();
    let b = planner.search(&belief, &mut RngStream::new(99)).unwrap();
    assert_eq!(a.action, b.action);
    assert_eq!(a.tree, b.tree);
}

#[test]
fn zero_iterations_is_an_argument_error() {
    let m = LinearGaussianModel::standard();
    let params = PlannerParams {
        iterations: 0,
        ..Default::default()
    };
    assert!(matches!(
        RbPomcpow::new(&m, &UniformRandom, params, UkfParams::default()),
        Err(rbpomdp::Error::Argument(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// 20 searches × 500 simulations.
    #[test]
    fn rb_pomcpow_tree_invariants(seed in any::<u64>(), k_obs in 1.0f64..6.0, alpha_obs in 0.05f64..0.6) {
        let m = LinearGaussianModel::standard();
        let params = PlannerParams {
            iterations: 500,
            max_depth: 6,
            k_action: 1.0,
            alpha_action: 0.5,
            k_obs,
            alpha_obs,
            ..Default::default()
        };
        let planner = RbPomcpow::new(&m, &UniformRandom, params, UkfParams::default()).unwrap();
        let mut rng = RngStream::new(seed);
        let belief = linear_belief(10, &mut rng);
        let out = planner.search(&belief, &mut rng).unwrap();
        prop_assert_eq!(out.tree.history(out.tree.root()).n, 500);
        if let Err(e) = out.tree.check_invariants(&params, true) {
            prop_assert!(false, "{}", e);
        }
    }

    #[test]
    fn pomcpow_tree_invariants(seed in any::<u64>()) {
        let m = LinearGaussianModel::standard();
        let params = PlannerParams { iterations: 500, max_depth: 6, k_action: 1.0, ..Default::default() };
        let mut rng = RngStream::new(seed);
        let particles = (0..10).map(|i| DVector::from_vec(vec![0.1 * i as f64, 0.0, 0.0])).collect();
        let belief = SirBelief::new(particles, 0.5, DVector::zeros(3)).unwrap();
        let planner = Pomcpow::new(&m, &UniformRandom, params).unwrap();
        let out = planner.search(&belief, &mut rng).unwrap();
        if let Err(e) = out.tree.check_invariants(&params, true) {
            prop_assert!(false, "{}", e);
        }
    }

    #[test]
    fn rb_pomcp_tree_invariants(seed in any::<u64>()) {
        let m = LinearGaussianModel::standard();
        let params = PlannerParams { iterations: 300, epsilon: 0.3, ..Default::default() };
        let mut rng = RngStream::new(seed);
        let belief = linear_belief(10, &mut rng);
        let planner = RbPomcp::new(&m, &UniformRandom, params, UkfParams::default()).unwrap();
        let out = planner.search(&belief, &mut rng).unwrap();
        if let Err(e) = out.tree.check_invariants(&params, false) {
            prop_assert!(false, "{}", e);
        }
    }
}
