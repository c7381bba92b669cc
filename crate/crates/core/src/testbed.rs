//! Small reference models with closed-form answers, used to check the
//! filters and planners against exact oracles.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::linalg::{log_gaussian, psd_sqrt};
use crate::model::{ActionId, Observation, PomdpModel, RbFactoredModel, State};
use crate::rng::RngStream;

fn normal_vec(n: usize, rng: &mut RngStream) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Conditionally linear-Gaussian model with a scalar random-walk `s^π`.
///
/// State layout `[s^π, s^α]`:
///
/// ```text
/// s'^π = s^π + w_π,                     w_π ~ N(0, pi_noise_var)
/// s'^α = A s^α + b s'^π + u_a + w_α,    w_α ~ N(0, Q)
/// o    = C s^α + d s^π + v,             v   ~ N(0, R)
/// ```
///
/// The joint model is linear-Gaussian, so a Kalman filter over the full
/// state is exact.
#[derive(Clone, Debug)]
pub struct LinearGaussianModel {
    pub pi_noise_var: f64,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub q: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub r: DMatrix<f64>,
    pub controls: Vec<DVector<f64>>,
    pub gamma: f64,
}

impl LinearGaussianModel {
    /// A two-dimensional tractable block driven by a random-walk `s^π`,
    /// observed in every component.
    pub fn standard() -> Self {
        Self {
            pi_noise_var: 0.04,
            a: DMatrix::from_row_slice(2, 2, &[0.95, 0.1, 0.0, 0.9]),
            b: DVector::from_vec(vec![0.2, 0.1]),
            q: DMatrix::from_row_slice(2, 2, &[0.05, 0.01, 0.01, 0.04]),
            c: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.5]),
            d: DVector::from_vec(vec![0.0, 0.0, 1.0]),
            r: DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, 0.3, 0.1])),
            controls: vec![DVector::zeros(2), DVector::from_vec(vec![0.1, -0.1])],
            gamma: 0.95,
        }
    }

    /// Joint transition matrix `F` with `x' = F x + [0; u] + w`.
    pub fn joint_transition(&self) -> DMatrix<f64> {
        let n = self.a.nrows();
        let mut f = DMatrix::zeros(n + 1, n + 1);
        f[(0, 0)] = 1.0;
        for i in 0..n {
            f[(i + 1, 0)] = self.b[i];
            for j in 0..n {
                f[(i + 1, j + 1)] = self.a[(i, j)];
            }
        }
        f
    }

    /// Joint process-noise covariance.
    pub fn joint_noise(&self) -> DMatrix<f64> {
        let n = self.a.nrows();
        let mut w = DMatrix::zeros(n + 1, n + 1);
        w[(0, 0)] = self.pi_noise_var;
        for i in 0..n {
            w[(i + 1, 0)] = self.b[i] * self.pi_noise_var;
            w[(0, i + 1)] = self.b[i] * self.pi_noise_var;
            for j in 0..n {
                w[(i + 1, j + 1)] = self.b[i] * self.b[j] * self.pi_noise_var + self.q[(i, j)];
            }
        }
        w
    }

    /// Joint observation matrix `H` with `o = H x + v`.
    pub fn joint_observation(&self) -> DMatrix<f64> {
        let m = self.c.nrows();
        let n = self.a.nrows();
        let mut h = DMatrix::zeros(m, n + 1);
        for i in 0..m {
            h[(i, 0)] = self.d[i];
            for j in 0..n {
                h[(i, j + 1)] = self.c[(i, j)];
            }
        }
        h
    }

    pub fn control(&self, a: ActionId) -> DVector<f64> {
        let mut u = DVector::zeros(self.a.nrows() + 1);
        u.rows_mut(1, self.a.nrows()).copy_from(&self.controls[a.0]);
        u
    }
}

impl PomdpModel for LinearGaussianModel {
    fn state_dim(&self) -> usize {
        self.a.nrows() + 1
    }

    fn obs_dim(&self) -> usize {
        self.c.nrows()
    }

    fn actions(&self) -> &[DVector<f64>] {
        &self.controls
    }

    fn discount(&self) -> f64 {
        self.gamma
    }

    /// Samples through the joint noise covariance, independently of the
    /// factored path.
    fn sample_transition(&self, s: &State, a: ActionId, rng: &mut RngStream) -> State {
        let l = psd_sqrt(&self.joint_noise());
        self.joint_transition() * s + self.control(a) + l * normal_vec(s.len(), rng)
    }

    fn sample_observation(&self, s_next: &State, _a: ActionId, rng: &mut RngStream) -> Result<Observation> {
        let l = psd_sqrt(&self.r);
        Ok(self.joint_observation() * s_next + l * normal_vec(self.obs_dim(), rng))
    }

    fn obs_density(&self, o: &Observation, s: &State, a: ActionId, s_next: &State) -> f64 {
        self.log_obs_density(o, s, a, s_next).exp()
    }

    fn log_obs_density(&self, o: &Observation, _s: &State, _a: ActionId, s_next: &State) -> f64 {
        let r = o - self.joint_observation() * s_next;
        log_gaussian(&r, &self.r).unwrap_or(f64::NEG_INFINITY)
    }

    fn observation_mean(&self, s: &State) -> Option<Observation> {
        Some(self.joint_observation() * s)
    }

    fn observation_cov(&self) -> Option<DMatrix<f64>> {
        Some(self.r.clone())
    }

    fn reward(&self, s: &State, _a: ActionId) -> f64 {
        -s.norm_squared()
    }

    fn is_terminal(&self, _s: &State) -> bool {
        false
    }
}

impl RbFactoredModel for LinearGaussianModel {
    fn pi_dim(&self) -> usize {
        1
    }

    fn alpha_dim(&self) -> usize {
        self.a.nrows()
    }

    fn split(&self, s: &State) -> (DVector<f64>, DVector<f64>) {
        (s.rows(0, 1).into_owned(), s.rows(1, self.a.nrows()).into_owned())
    }

    fn join(&self, s_pi: &DVector<f64>, s_alpha: &DVector<f64>) -> State {
        let mut s = DVector::zeros(1 + s_alpha.len());
        s[0] = s_pi[0];
        s.rows_mut(1, s_alpha.len()).copy_from(s_alpha);
        s
    }

    fn sample_pi_transition(&self, s_pi: &DVector<f64>, _a: ActionId, rng: &mut RngStream) -> DVector<f64> {
        let z: f64 = StandardNormal.sample(rng);
        DVector::from_element(1, s_pi[0] + self.pi_noise_var.sqrt() * z)
    }

    fn tractable_dynamics(
        &self,
        s_alpha: &DVector<f64>,
        _s_pi: &DVector<f64>,
        s_pi_next: &DVector<f64>,
        a: ActionId,
    ) -> DVector<f64> {
        &self.a * s_alpha + &self.b * s_pi_next[0] + &self.controls[a.0]
    }

    fn tractable_noise(&self, _s_pi: &DVector<f64>, _s_pi_next: &DVector<f64>, _a: ActionId) -> DMatrix<f64> {
        self.q.clone()
    }

    fn observe_tractable(&self, s_alpha: &DVector<f64>, s_pi: &DVector<f64>) -> Observation {
        &self.c * s_alpha + &self.d * s_pi[0]
    }

    fn observation_noise(&self) -> DMatrix<f64> {
        self.r.clone()
    }
}

/// Deterministic chain: the state never moves and action `i` pays
/// `rewards[i]` every step. Value of always taking action `i` for `D`
/// steps is `rewards[i] (1 - γ^D) / (1 - γ)`.
#[derive(Clone, Debug)]
pub struct ConstantRewardChain {
    pub rewards: Vec<f64>,
    pub gamma: f64,
    actions: Vec<DVector<f64>>,
}

impl ConstantRewardChain {
    pub fn new(rewards: Vec<f64>, gamma: f64) -> Self {
        let actions = (0..rewards.len()).map(|i| DVector::from_element(1, i as f64)).collect();
        Self {
            rewards,
            gamma,
            actions,
        }
    }
}

impl PomdpModel for ConstantRewardChain {
    fn state_dim(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn actions(&self) -> &[DVector<f64>] {
        &self.actions
    }

    fn discount(&self) -> f64 {
        self.gamma
    }

    fn sample_transition(&self, s: &State, _a: ActionId, _rng: &mut RngStream) -> State {
        s.clone()
    }

    fn sample_observation(&self, s_next: &State, _a: ActionId, rng: &mut RngStream) -> Result<Observation> {
        let z: f64 = StandardNormal.sample(rng);
        Ok(DVector::from_element(1, s_next[1] + z))
    }

    fn obs_density(&self, o: &Observation, _s: &State, _a: ActionId, s_next: &State) -> f64 {
        let r = o[0] - s_next[1];
        (-0.5 * r * r).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    fn observation_mean(&self, s: &State) -> Option<Observation> {
        Some(DVector::from_element(1, s[1]))
    }

    fn observation_cov(&self) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(1, 1))
    }

    fn reward(&self, _s: &State, a: ActionId) -> f64 {
        self.rewards[a.0]
    }

    fn is_terminal(&self, _s: &State) -> bool {
        false
    }
}

impl RbFactoredModel for ConstantRewardChain {
    fn pi_dim(&self) -> usize {
        1
    }

    fn alpha_dim(&self) -> usize {
        1
    }

    fn split(&self, s: &State) -> (DVector<f64>, DVector<f64>) {
        (DVector::from_element(1, s[0]), DVector::from_element(1, s[1]))
    }

    fn join(&self, s_pi: &DVector<f64>, s_alpha: &DVector<f64>) -> State {
        DVector::from_vec(vec![s_pi[0], s_alpha[0]])
    }

    fn sample_pi_transition(&self, s_pi: &DVector<f64>, _a: ActionId, _rng: &mut RngStream) -> DVector<f64> {
        s_pi.clone()
    }

    fn tractable_dynamics(
        &self,
        s_alpha: &DVector<f64>,
        _s_pi: &DVector<f64>,
        _s_pi_next: &DVector<f64>,
        _a: ActionId,
    ) -> DVector<f64> {
        s_alpha.clone()
    }

    fn tractable_noise(&self, _s_pi: &DVector<f64>, _s_pi_next: &DVector<f64>, _a: ActionId) -> DMatrix<f64> {
        DMatrix::zeros(1, 1)
    }

    fn observe_tractable(&self, s_alpha: &DVector<f64>, _s_pi: &DVector<f64>) -> Observation {
        s_alpha.clone()
    }

    fn observation_noise(&self) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }
}
