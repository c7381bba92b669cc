//! Range-bearing localization benchmark.
//!
//! A unicycle agent in a bounded 2-D world measures noisy range and bearing
//! to known landmarks and must reach a goal disc at the origin. The state is
//! `[ξ, η, θ]`. Heading is the particle-filtered block `s^π = [θ]`; position
//! `s^α = [ξ, η]` is conditionally Gaussian given the heading path because
//! each Euler step moves along the heading held at the start of the step.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{RbBelief, SirBelief, UkfParams};
use crate::linalg::wrap_angle;
use crate::model::{ActionId, Observation, PomdpModel, RbFactoredModel, State, StateBounds};
use crate::planners::RolloutPolicy;
use crate::quadrature::GaussianStat;
use crate::rng::RngStream;

/// Agent pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub xi: f64,
    pub eta: f64,
    /// Heading in `(-π, π]`.
    pub theta: f64,
}

impl AgentState {
    pub fn new(xi: f64, eta: f64, theta: f64) -> Self {
        Self {
            xi,
            eta,
            theta: wrap_angle(theta),
        }
    }

    pub fn to_vector(self) -> State {
        DVector::from_vec(vec![self.xi, self.eta, self.theta])
    }

    pub fn from_vector(s: &State) -> Self {
        Self {
            xi: s[0],
            eta: s[1],
            theta: s[2],
        }
    }

    pub fn distance_to_origin(&self) -> f64 {
        self.xi.hypot(self.eta)
    }
}

/// Speed (m/s) and turn rate (rad/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveAction {
    pub speed: f64,
    pub turn_rate: f64,
}

impl MoveAction {
    pub fn new(speed: f64, turn_rate: f64) -> Self {
        Self { speed, turn_rate }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkMap {
    pub landmarks: Vec<[f64; 2]>,
}

impl LandmarkMap {
    pub fn new(landmarks: Vec<[f64; 2]>) -> Result<Self> {
        let map = Self { landmarks };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if self.landmarks.is_empty() {
            return Err(Error::Argument("landmark map is empty".into()));
        }
        for (i, a) in self.landmarks.iter().enumerate() {
            for b in &self.landmarks[i + 1..] {
                if a == b {
                    return Err(Error::Argument(format!("duplicate landmark at {a:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }
}

impl Default for LandmarkMap {
    fn default() -> Self {
        Self {
            landmarks: vec![[-10.0, 0.0], [0.0, 10.0], [10.0, -10.0]],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
    /// Subtracted from the reward on every step that starts inside the disc.
    pub penalty: f64,
}

/// Scenario parameters. Every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Euler integration step (s).
    pub dt: f64,
    pub world_min: [f64; 2],
    pub world_max: [f64; 2],
    pub goal_radius: f64,
    pub terminal_reward: f64,
    pub obstacle: Option<Obstacle>,
    /// `Ψ_s` over `[ξ, η, θ]`.
    pub state_weights: [[f64; 3]; 3],
    /// `Φ_a` over `[speed, turn rate]`.
    pub action_weights: [[f64; 2]; 2],
    pub range_var: f64,
    pub bearing_var: f64,
    /// Mean of the multiplicative actuation noise `(w̃_s, w̃_ω)`.
    pub actuation_mean: [f64; 2],
    /// Variances of `(w̃_s, w̃_ω)`; the two are independent.
    pub actuation_var: [f64; 2],
    pub discount: f64,
    pub actions: Vec<MoveAction>,
    pub start: [f64; 3],
    /// Standard deviation of the initial position belief (m).
    pub initial_position_std: f64,
    pub max_steps: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        let speeds = [1.0, -0.5];
        let turns = [-0.5, 0.0, 0.5];
        Self {
            dt: 0.5,
            world_min: [-10.0, -10.0],
            world_max: [10.0, 10.0],
            goal_radius: 1.0,
            terminal_reward: 100.0,
            obstacle: Some(Obstacle {
                center: [-4.0, -4.0],
                radius: 1.5,
                penalty: 50.0,
            }),
            state_weights: [[0.1, 0.0, 0.0], [0.0, 0.1, 0.0], [0.0, 0.0, 0.0]],
            action_weights: [[0.05, 0.0], [0.0, 0.05]],
            range_var: 0.25,
            bearing_var: 0.01,
            actuation_mean: [1.0, 1.0],
            actuation_var: [0.1, 0.1],
            discount: 0.95,
            actions: speeds
                .iter()
                .flat_map(|&s| turns.iter().map(move |&w| MoveAction::new(s, w)))
                .collect(),
            start: [-8.0, -8.0, 0.0],
            initial_position_std: 1.0,
            max_steps: 100,
        }
    }
}

fn is_psd<const N: usize>(m: &[[f64; N]; N]) -> bool {
    let mat = DMatrix::from_fn(N, N, |i, j| m[i][j]);
    (&mat - mat.transpose()).amax() <= 1e-12 && mat.symmetric_eigenvalues().iter().all(|&v| v >= -1e-12)
}

impl WorldConfig {
    /// Every stochastic term switched off.
    pub fn noiseless(mut self) -> Self {
        self.range_var = 0.0;
        self.bearing_var = 0.0;
        self.actuation_var = [0.0, 0.0];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Argument(msg.to_string()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.goal_radius > 0.0) {
            return bad("goal radius must be positive");
        }
        if self.world_min[0] >= self.world_max[0] || self.world_min[1] >= self.world_max[1] {
            return bad("world box is empty");
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad("discount must lie in (0, 1)");
        }
        if self.actions.is_empty() {
            return bad("action list is empty");
        }
        if self.range_var < 0.0 || self.bearing_var < 0.0 || self.actuation_var.iter().any(|&v| v < 0.0) {
            return bad("noise variances must be non-negative");
        }
        if !is_psd(&self.state_weights) || !is_psd(&self.action_weights) {
            return bad("reward weighting matrices must be symmetric positive semidefinite");
        }
        if let Some(o) = &self.obstacle {
            if o.radius < 0.0 {
                return bad("obstacle radius must be non-negative");
            }
        }
        Ok(())
    }

    fn in_goal(&self, xi: f64, eta: f64) -> bool {
        xi.hypot(eta) <= self.goal_radius
    }

    fn in_obstacle(&self, xi: f64, eta: f64) -> bool {
        self.obstacle
            .as_ref()
            .is_some_and(|o| (xi - o.center[0]).hypot(eta - o.center[1]) <= o.radius)
    }

    fn quadratic_cost(&self, s: &AgentState, a: &MoveAction) -> f64 {
        let x = [s.xi, s.eta, s.theta];
        let u = [a.speed, a.turn_rate];
        let mut c = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                c += x[i] * self.state_weights[i][j] * x[j];
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                c += u[i] * self.action_weights[i][j] * u[j];
            }
        }
        c
    }
}

/// Euler step with the actuation noise fixed at `(w_s, w_omega)`. Position
/// moves along the heading held at the start of the step. The result is
/// clamped to the world box.
pub fn transition_with_noise(s: &AgentState, a: &MoveAction, w_s: f64, w_omega: f64, cfg: &WorldConfig) -> AgentState {
    let v = a.speed * w_s * cfg.dt;
    AgentState {
        xi: (s.xi + v * s.theta.cos()).clamp(cfg.world_min[0], cfg.world_max[0]),
        eta: (s.eta + v * s.theta.sin()).clamp(cfg.world_min[1], cfg.world_max[1]),
        theta: wrap_angle(s.theta + a.turn_rate * w_omega * cfg.dt),
    }
}

/// Samples `T(· | s, a)`.
pub fn transition(s: &AgentState, a: &MoveAction, cfg: &WorldConfig, rng: &mut RngStream) -> AgentState {
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    let w_s = cfg.actuation_mean[0] + cfg.actuation_var[0].sqrt() * z1;
    let w_omega = cfg.actuation_mean[1] + cfg.actuation_var[1].sqrt() * z2;
    transition_with_noise(s, a, w_s, w_omega, cfg)
}

/// Noise-free `(ρ₁, φ₁, …, ρ_J, φ_J)` seen from `(xi, eta)` with heading
/// `theta`. Bearings are wrapped.
pub fn predicted_observation(xi: f64, eta: f64, theta: f64, map: &LandmarkMap) -> Observation {
    let mut o = DVector::zeros(2 * map.len());
    for (j, lm) in map.landmarks.iter().enumerate() {
        let dx = lm[0] - xi;
        let dy = lm[1] - eta;
        o[2 * j] = dx.hypot(dy);
        o[2 * j + 1] = wrap_angle(dy.atan2(dx) - theta);
    }
    o
}

/// Samples a range-bearing observation.
///
/// Noisy ranges may come out negative; they are not clamped. Fails when
/// the agent sits on a landmark, where bearing is undefined.
pub fn observe(s: &AgentState, map: &LandmarkMap, cfg: &WorldConfig, rng: &mut RngStream) -> Result<Observation> {
    for lm in &map.landmarks {
        if (lm[0] - s.xi).hypot(lm[1] - s.eta) < 1e-12 {
            return Err(Error::Domain(format!("agent coincides with landmark {lm:?}")));
        }
    }
    let mut o = predicted_observation(s.xi, s.eta, s.theta, map);
    let (sr, sb) = (cfg.range_var.sqrt(), cfg.bearing_var.sqrt());
    for j in 0..map.len() {
        let zr: f64 = StandardNormal.sample(rng);
        let zb: f64 = StandardNormal.sample(rng);
        o[2 * j] += sr * zr;
        o[2 * j + 1] = wrap_angle(o[2 * j + 1] + sb * zb);
    }
    Ok(o)
}

/// `R(s, a) = -(sᵀΨs + aᵀΦa) + R_terminal·[s in goal] - penalty·[s in obstacle]`.
pub fn reward(s: &AgentState, a: &MoveAction, cfg: &WorldConfig) -> f64 {
    let mut r = -cfg.quadratic_cost(s, a);
    if cfg.in_goal(s.xi, s.eta) {
        r += cfg.terminal_reward;
    }
    if cfg.in_obstacle(s.xi, s.eta) {
        r -= cfg.obstacle.as_ref().map_or(0.0, |o| o.penalty);
    }
    r
}

/// The benchmark POMDP with its Rao-Blackwell split.
#[derive(Clone, Debug)]
pub struct LocalizationModel {
    pub cfg: WorldConfig,
    pub map: LandmarkMap,
    actions: Vec<DVector<f64>>,
    bounds: StateBounds,
    obs_var: DVector<f64>,
}

/// Builds the factored model: `s^π = [θ]` particle-filtered, `s^α = [ξ, η]`
/// UKF-filtered given the heading path.
pub fn rb_factorization(cfg: &WorldConfig, map: &LandmarkMap) -> Result<LocalizationModel> {
    LocalizationModel::new(cfg.clone(), map.clone())
}

impl LocalizationModel {
    pub fn new(cfg: WorldConfig, map: LandmarkMap) -> Result<Self> {
        cfg.validate()?;
        map.validate()?;
        let actions = cfg
            .actions
            .iter()
            .map(|a| DVector::from_vec(vec![a.speed, a.turn_rate]))
            .collect();
        let bounds = StateBounds {
            lower: DVector::from_vec(vec![cfg.world_min[0], cfg.world_min[1], -PI]),
            upper: DVector::from_vec(vec![cfg.world_max[0], cfg.world_max[1], PI]),
        };
        let obs_var = DVector::from_fn(
            2 * map.len(),
            |i, _| if i % 2 == 0 { cfg.range_var } else { cfg.bearing_var },
        );
        Ok(Self {
            cfg,
            map,
            actions,
            bounds,
            obs_var,
        })
    }

    pub fn move_action(&self, a: ActionId) -> &MoveAction {
        &self.cfg.actions[a.0]
    }

    pub fn start_state(&self) -> AgentState {
        AgentState::new(self.cfg.start[0], self.cfg.start[1], self.cfg.start[2])
    }

    fn stratified_headings(n: usize, rng: &mut RngStream) -> Vec<f64> {
        let offset: f64 = rng.random();
        (0..n)
            .map(|i| wrap_angle(-PI + (i as f64 + offset) * 2.0 * PI / n as f64))
            .collect()
    }

    /// Initial RBPF belief: headings spread evenly over the circle, each with
    /// a Gaussian over position centred on the start.
    pub fn initial_rb_belief(&self, n: usize, threshold: f64, ukf: UkfParams, rng: &mut RngStream) -> Result<RbBelief> {
        let sd = self.cfg.initial_position_std;
        let theta = GaussianStat::new(
            DVector::from_vec(vec![self.cfg.start[0], self.cfg.start[1]]),
            DMatrix::identity(2, 2) * (sd * sd),
        )?;
        let particles = Self::stratified_headings(n, rng)
            .into_iter()
            .map(|h| (DVector::from_element(1, h), theta.clone()))
            .collect();
        RbBelief::new(particles, threshold, ukf)
    }

    /// Initial bootstrap belief: Gaussian positions, evenly spread headings.
    pub fn initial_sir_belief(&self, n: usize, threshold: f64, jitter: f64, rng: &mut RngStream) -> Result<SirBelief> {
        let sd = self.cfg.initial_position_std;
        let particles = Self::stratified_headings(n, rng)
            .into_iter()
            .map(|h| {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                let mut s = DVector::from_vec(vec![self.cfg.start[0] + sd * z1, self.cfg.start[1] + sd * z2, h]);
                self.bounds.clamp(&mut s);
                s
            })
            .collect();
        SirBelief::new(particles, threshold, DVector::from_element(3, jitter))
    }

    /// Reward for the ideal straight-line run from the start: heading
    /// aligned with the goal from the first step, top forward speed, no
    /// noise, no obstacle. Discounted sum up to and including the terminal
    /// reward collected on arrival.
    pub fn ideal_return(&self) -> f64 {
        let cfg = &self.cfg;
        let top = cfg
            .actions
            .iter()
            .filter(|a| a.speed > 0.0)
            .max_by(|a, b| {
                a.speed
                    .total_cmp(&b.speed)
                    .then(b.turn_rate.abs().total_cmp(&a.turn_rate.abs()))
            })
            .copied()
            .unwrap_or(MoveAction::new(0.0, 0.0));
        let step = top.speed * cfg.actuation_mean[0] * cfg.dt;
        let (mut x, mut y) = (cfg.start[0], cfg.start[1]);
        let heading = (-y).atan2(-x);
        let mut total = 0.0;
        let mut discount = 1.0;
        for _ in 0..=cfg.max_steps {
            if cfg.in_goal(x, y) {
                return total + discount * cfg.terminal_reward;
            }
            if step <= 0.0 {
                break;
            }
            let s = AgentState::new(x, y, heading);
            total += discount * -cfg.quadratic_cost(&s, &top);
            discount *= cfg.discount;
            x += step * heading.cos();
            y += step * heading.sin();
        }
        total
    }
}

impl PomdpModel for LocalizationModel {
    fn state_dim(&self) -> usize {
        3
    }

    fn obs_dim(&self) -> usize {
        2 * self.map.len()
    }

    fn bounds(&self) -> Option<&StateBounds> {
        Some(&self.bounds)
    }

    fn actions(&self) -> &[DVector<f64>] {
        &self.actions
    }

    fn discount(&self) -> f64 {
        self.cfg.discount
    }

    fn sample_transition(&self, s: &State, a: ActionId, rng: &mut RngStream) -> State {
        transition(&AgentState::from_vector(s), self.move_action(a), &self.cfg, rng).to_vector()
    }

    fn sample_observation(&self, s_next: &State, _a: ActionId, rng: &mut RngStream) -> Result<Observation> {
        observe(&AgentState::from_vector(s_next), &self.map, &self.cfg, rng)
    }

    fn obs_density(&self, o: &Observation, s: &State, a: ActionId, s_next: &State) -> f64 {
        self.log_obs_density(o, s, a, s_next).exp()
    }

    fn log_obs_density(&self, o: &Observation, _s: &State, _a: ActionId, s_next: &State) -> f64 {
        let pred = predicted_observation(s_next[0], s_next[1], s_next[2], &self.map);
        let r = self.observation_residual(o, &pred);
        let mut acc = 0.0;
        for (ri, vi) in r.iter().zip(self.obs_var.iter()) {
            acc += (2.0 * PI * vi).ln() + ri * ri / vi;
        }
        if acc.is_nan() {
            return f64::NEG_INFINITY;
        }
        -0.5 * acc
    }

    fn observation_mean(&self, s: &State) -> Option<Observation> {
        Some(predicted_observation(s[0], s[1], s[2], &self.map))
    }

    fn observation_cov(&self) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_diagonal(&self.obs_var))
    }

    fn observation_residual(&self, o: &Observation, predicted: &Observation) -> DVector<f64> {
        let mut r = o - predicted;
        for j in 0..self.map.len() {
            r[2 * j + 1] = wrap_angle(r[2 * j + 1]);
        }
        r
    }

    fn canonicalize(&self, s: &mut State) {
        s[2] = wrap_angle(s[2]);
        self.bounds.clamp(s);
    }

    fn reward(&self, s: &State, a: ActionId) -> f64 {
        reward(&AgentState::from_vector(s), self.move_action(a), &self.cfg)
    }

    fn is_terminal(&self, s: &State) -> bool {
        self.cfg.in_goal(s[0], s[1])
    }

    fn terminal_reward(&self) -> f64 {
        self.cfg.terminal_reward
    }
}

impl RbFactoredModel for LocalizationModel {
    fn pi_dim(&self) -> usize {
        1
    }

    fn alpha_dim(&self) -> usize {
        2
    }

    fn split(&self, s: &State) -> (DVector<f64>, DVector<f64>) {
        (DVector::from_element(1, s[2]), DVector::from_vec(vec![s[0], s[1]]))
    }

    fn join(&self, s_pi: &DVector<f64>, s_alpha: &DVector<f64>) -> State {
        DVector::from_vec(vec![s_alpha[0], s_alpha[1], s_pi[0]])
    }

    fn sample_pi_transition(&self, s_pi: &DVector<f64>, a: ActionId, rng: &mut RngStream) -> DVector<f64> {
        let z: f64 = StandardNormal.sample(rng);
        let w_omega = self.cfg.actuation_mean[1] + self.cfg.actuation_var[1].sqrt() * z;
        let turn = self.move_action(a).turn_rate;
        DVector::from_element(1, wrap_angle(s_pi[0] + turn * w_omega * self.cfg.dt))
    }

    fn tractable_dynamics(
        &self,
        s_alpha: &DVector<f64>,
        s_pi: &DVector<f64>,
        _s_pi_next: &DVector<f64>,
        a: ActionId,
    ) -> DVector<f64> {
        let v = self.move_action(a).speed * self.cfg.actuation_mean[0] * self.cfg.dt;
        DVector::from_vec(vec![s_alpha[0] + v * s_pi[0].cos(), s_alpha[1] + v * s_pi[0].sin()])
    }

    fn tractable_noise(&self, s_pi: &DVector<f64>, _s_pi_next: &DVector<f64>, a: ActionId) -> DMatrix<f64> {
        let v = self.move_action(a).speed * self.cfg.dt;
        let (s, c) = s_pi[0].sin_cos();
        let k = self.cfg.actuation_var[0] * v * v;
        DMatrix::from_row_slice(2, 2, &[k * c * c, k * c * s, k * c * s, k * s * s])
    }

    fn observe_tractable(&self, s_alpha: &DVector<f64>, s_pi: &DVector<f64>) -> Observation {
        predicted_observation(s_alpha[0], s_alpha[1], s_pi[0], &self.map)
    }

    fn observation_noise(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.obs_var)
    }
}

/// Rollout heuristic: drive at the top forward speed with the turn rate
/// that best cancels the bearing error to the goal over one step. Ties go
/// to the lowest action index.
#[derive(Clone, Copy, Debug, Default)]
pub struct HeadingToGoal;

impl HeadingToGoal {
    pub fn choose(model: &LocalizationModel, s: &State) -> ActionId {
        let cfg = &model.cfg;
        let top = cfg.actions.iter().map(|a| a.speed).fold(f64::NEG_INFINITY, f64::max);
        let error = wrap_angle((-s[1]).atan2(-s[0]) - s[2]);
        let mut best = (f64::INFINITY, 0);
        for (i, a) in cfg.actions.iter().enumerate() {
            if a.speed != top {
                continue;
            }
            let miss = wrap_angle(error - a.turn_rate * cfg.actuation_mean[1] * cfg.dt).abs();
            if miss < best.0 {
                best = (miss, i);
            }
        }
        ActionId(best.1)
    }
}

impl RolloutPolicy<LocalizationModel> for HeadingToGoal {
    fn select(&self, model: &LocalizationModel, state: &State, _rng: &mut RngStream) -> ActionId {
        Self::choose(model, state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> LocalizationModel {
        LocalizationModel::new(WorldConfig::default(), LandmarkMap::default()).unwrap()
    }

    #[test]
    fn defaults_match_pinned_scenario() {
        let cfg = WorldConfig::default();
        assert_eq!(cfg.actions.len(), 6);
        assert_eq!(cfg.dt, 0.5);
        assert_eq!(LandmarkMap::default().len(), 3);
        cfg.validate().unwrap();
    }

    #[test]
    fn euler_step_at_noise_mean() {
        let cfg = WorldConfig::default();
        let a = MoveAction::new(1.0, 0.0);
        let s = transition_with_noise(&AgentState::new(0.0, 0.0, 0.0), &a, 1.0, 1.0, &cfg);
        assert_eq!((s.xi, s.eta, s.theta), (0.5, 0.0, 0.0));
        let s = transition_with_noise(&AgentState::new(0.0, 0.0, PI / 2.0), &a, 1.0, 1.0, &cfg);
        assert!(s.xi.abs() < 1e-15 && (s.eta - 0.5).abs() < 1e-15 && (s.theta - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_generative_step() {
        let m = LocalizationModel::new(WorldConfig::default().noiseless(), LandmarkMap::default()).unwrap();
        let a = m
            .cfg
            .actions
            .iter()
            .position(|a| a.speed == 1.0 && a.turn_rate == 0.0)
            .unwrap();
        let out = m
            .generative_step(
                &DVector::from_vec(vec![3.0, 3.0, 0.0]),
                ActionId(a),
                &mut RngStream::new(0),
            )
            .unwrap();
        assert_eq!(out.next_state.as_slice(), &[3.5, 3.0, 0.0]);
        assert!(!out.terminal);
    }

    #[test]
    fn transition_clamps_to_box() {
        let cfg = WorldConfig::default();
        let s = transition_with_noise(
            &AgentState::new(9.9, 0.0, 0.0),
            &MoveAction::new(1.0, 0.0),
            1.0,
            1.0,
            &cfg,
        );
        assert_eq!(s.xi, 10.0);
    }

    #[test]
    fn zero_noise_observations() {
        let cfg = WorldConfig::default().noiseless();
        let mut rng = RngStream::new(0);
        let single = |x: f64, y: f64| LandmarkMap::new(vec![[x, y]]).unwrap();
        let o = observe(&AgentState::new(0.0, 0.0, 0.0), &single(1.0, 0.0), &cfg, &mut rng).unwrap();
        assert_eq!(o.as_slice(), &[1.0, 0.0]);
        let o = observe(&AgentState::new(0.0, 0.0, 0.0), &single(0.0, 1.0), &cfg, &mut rng).unwrap();
        assert!((o[0] - 1.0).abs() < 1e-15 && (o[1] - PI / 2.0).abs() < 1e-15);
        let o = observe(&AgentState::new(0.0, 0.0, PI / 2.0), &single(0.0, 1.0), &cfg, &mut rng).unwrap();
        assert!((o[0] - 1.0).abs() < 1e-15 && o[1].abs() < 1e-15);
    }

    #[test]
    fn observing_from_a_landmark_fails() {
        let cfg = WorldConfig::default();
        let map = LandmarkMap::new(vec![[1.0, 1.0]]).unwrap();
        let r = observe(&AgentState::new(1.0, 1.0, 0.0), &map, &cfg, &mut RngStream::new(0));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn landmark_map_validation() {
        assert!(LandmarkMap::new(vec![]).is_err());
        assert!(LandmarkMap::new(vec![[1.0, 2.0], [1.0, 2.0]]).is_err());
    }

    #[test]
    fn reward_examples() {
        let mut cfg = WorldConfig::default();
        let zero = MoveAction::new(0.0, 0.0);
        assert_eq!(reward(&AgentState::new(0.0, 0.0, 0.3), &zero, &cfg), 100.0);
        cfg.state_weights = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
        assert_eq!(reward(&AgentState::new(3.0, 4.0, 1.0), &zero, &cfg), -25.0);
        let inside = AgentState::new(-4.0, -4.5, 0.0);
        let quad = 1.0 * (16.0 + 20.25);
        assert_eq!(reward(&inside, &zero, &cfg), -quad - 50.0);
    }

    #[test]
    fn terminal_step_pays_terminal_reward() {
        let m = model();
        let out = m
            .generative_step(
                &DVector::from_vec(vec![0.2, -0.1, 1.0]),
                ActionId(0),
                &mut RngStream::new(3),
            )
            .unwrap();
        assert!(out.terminal);
        assert_eq!(out.reward, 100.0);
        assert_eq!(out.next_state.as_slice(), &[0.2, -0.1, 1.0]);
    }

    #[test]
    fn out_of_box_state_is_a_domain_error() {
        let m = model();
        let r = m.generative_step(
            &DVector::from_vec(vec![11.0, 0.0, 0.0]),
            ActionId(0),
            &mut RngStream::new(0),
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn generative_step_is_reproducible() {
        let m = model();
        let s = m.start_state().to_vector();
        let a = m.generative_step(&s, ActionId(2), &mut RngStream::new(42)).unwrap();
        let b = m.generative_step(&s, ActionId(2), &mut RngStream::new(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn factored_dimensions() {
        let m = model();
        assert_eq!((m.pi_dim(), m.alpha_dim(), m.state_dim()), (1, 2, 3));
        let s = DVector::from_vec(vec![1.0, 2.0, 0.5]);
        let (p, a) = m.split(&s);
        assert_eq!(m.join(&p, &a), s);
    }

    #[test]
    fn zero_actuation_noise_adds_no_covariance() {
        let cfg = WorldConfig {
            actuation_var: [0.0, 0.0],
            ..Default::default()
        };
        let m = LocalizationModel::new(cfg, LandmarkMap::default()).unwrap();
        let th = DVector::from_element(1, 0.7);
        for a in 0..m.num_actions() {
            assert_eq!(m.tractable_noise(&th, &th, ActionId(a)), DMatrix::zeros(2, 2));
        }
    }

    #[test]
    fn obs_density_peak_matches_gaussian_normalizer() {
        let m = model();
        let s = DVector::from_vec(vec![-3.0, 2.0, 0.4]);
        let o = m.observation_mean(&s).unwrap();
        let d = m.obs_density(&o, &s, ActionId(0), &s);
        let peak = (2.0 * PI * 0.25).powf(-1.5) * (2.0 * PI * 0.01).powf(-1.5);
        assert!((d / peak - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_return_for_pinned_scenario() {
        // straight line from (-8,-8): 0.5 m per step, first position within
        // 1 m of the origin after ceil((|p0|-1)/0.5) steps
        let m = model();
        let d0 = 128f64.sqrt();
        let steps = ((d0 - 1.0) / 0.5).ceil() as usize;
        let mut expect = 0.0;
        for k in 0..steps {
            let d = d0 - 0.5 * k as f64;
            expect += 0.95f64.powi(k as i32) * -(0.1 * d * d + 0.05);
        }
        expect += 0.95f64.powi(steps as i32) * 100.0;
        assert!(
            (m.ideal_return() - expect).abs() < 1e-9,
            "{} vs {}",
            m.ideal_return(),
            expect
        );
    }

    #[test]
    fn heading_to_goal_turns_toward_origin() {
        let m = model();
        // facing +y from (-5, 0): origin lies to the right, so turn negative
        let a = HeadingToGoal::choose(&m, &DVector::from_vec(vec![-5.0, 0.0, PI / 2.0]));
        let mv = m.move_action(a);
        assert!(mv.speed > 0.0 && mv.turn_rate < 0.0, "{mv:?}");
        let a = HeadingToGoal::choose(&m, &DVector::from_vec(vec![-5.0, 0.0, 0.0]));
        let mv = m.move_action(a);
        assert!(mv.speed > 0.0 && mv.turn_rate == 0.0, "{mv:?}");
    }
}
