//! POMDP and Rao-Blackwell factored model contracts.
//!
//! States, actions and observations are flat `f64` vectors. Actions come
//! from a finite list and are referred to by [`ActionId`]. All randomness is
//! drawn from an injected [`RngStream`].

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::psd_sqrt;
use crate::rng::RngStream;

pub type State = DVector<f64>;
pub type Observation = DVector<f64>;

/// Index into a model's action list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub usize);

/// Axis-aligned box on the state space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateBounds {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl StateBounds {
    pub fn contains(&self, s: &State, tol: f64) -> bool {
        s.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(x, (lo, hi))| *x >= lo - tol && *x <= hi + tol)
    }

    pub fn clamp(&self, s: &mut State) {
        for (i, x) in s.iter_mut().enumerate() {
            *x = x.clamp(self.lower[i], self.upper[i]);
        }
    }
}

/// The `(s', o, r)` triple of one generative step.
#[derive(Clone, Debug, PartialEq)]
pub struct GenOutput {
    pub next_state: State,
    pub observation: Observation,
    pub reward: f64,
    /// The input state was terminal: no transition happened and `reward`
    /// is the terminal reward.
    pub terminal: bool,
}

/// A POMDP `(S, A, T, O, R, Z, γ)` with a generative interface.
///
/// Reward convention: `reward(s, a)` is charged on the outgoing
/// state-action pair. Terminal states are absorbing; stepping from one
/// yields [`PomdpModel::terminal_reward`] once and nothing further.
pub trait PomdpModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;

    fn bounds(&self) -> Option<&StateBounds> {
        None
    }

    fn actions(&self) -> &[DVector<f64>];

    fn action(&self, a: ActionId) -> &DVector<f64> {
        &self.actions()[a.0]
    }

    fn num_actions(&self) -> usize {
        self.actions().len()
    }

    /// Discount factor, strictly inside `(0, 1)`.
    fn discount(&self) -> f64;

    /// Draws `s' ~ T(· | s, a)`.
    fn sample_transition(&self, s: &State, a: ActionId, rng: &mut RngStream) -> State;

    /// Draws `o ~ Z(· | s', a)`.
    fn sample_observation(&self, s_next: &State, a: ActionId, rng: &mut RngStream) -> Result<Observation>;

    /// Density `Z(o | s, a, s')`. Never negative; zero for hopeless matches.
    fn obs_density(&self, o: &Observation, s: &State, a: ActionId, s_next: &State) -> f64;

    /// `ln Z(o | s, a, s')`; `-∞` where the density vanishes.
    fn log_obs_density(&self, o: &Observation, s: &State, a: ActionId, s_next: &State) -> f64 {
        self.obs_density(o, s, a, s_next).ln()
    }

    /// Noise-free observation of `s`, when the model has one.
    fn observation_mean(&self, _s: &State) -> Option<Observation> {
        None
    }

    /// Additive observation-noise covariance, when the model has one.
    fn observation_cov(&self) -> Option<DMatrix<f64>> {
        None
    }

    /// `o - predicted`, with any angular components wrapped.
    fn observation_residual(&self, o: &Observation, predicted: &Observation) -> DVector<f64> {
        o - predicted
    }

    /// Projects a perturbed state back into canonical form (angle
    /// wrapping, box clamping). Identity by default.
    fn canonicalize(&self, _s: &mut State) {}

    /// Immediate reward `R(s, a)` for a non-terminal `s`.
    fn reward(&self, s: &State, a: ActionId) -> f64;

    fn is_terminal(&self, s: &State) -> bool;

    fn terminal_reward(&self) -> f64 {
        0.0
    }

    /// Reward for stepping from `s`, terminal or not.
    fn step_reward(&self, s: &State, a: ActionId) -> f64 {
        if self.is_terminal(s) {
            self.terminal_reward()
        } else {
            self.reward(s, a)
        }
    }

    fn check_state(&self, s: &State) -> Result<()> {
        if s.len() != self.state_dim() {
            return Err(Error::Argument(format!(
                "state has dimension {}, model expects {}",
                s.len(),
                self.state_dim()
            )));
        }
        if let Some(b) = self.bounds() {
            if !b.contains(s, 1e-9) {
                return Err(Error::Domain(format!("state {:?} outside bounds", s.as_slice())));
            }
        }
        Ok(())
    }

    /// Checks the static model invariants: `γ ∈ (0, 1)` and a non-empty
    /// action set.
    fn validate(&self) -> Result<()> {
        let g = self.discount();
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::Argument(format!("discount {g} not in (0, 1)")));
        }
        if self.actions().is_empty() {
            return Err(Error::Argument("empty action set".into()));
        }
        Ok(())
    }

    /// One draw from the generative model `G(s, a)`.
    fn generative_step(&self, s: &State, a: ActionId, rng: &mut RngStream) -> Result<GenOutput> {
        self.check_state(s)?;
        if a.0 >= self.num_actions() {
            return Err(Error::Argument(format!("action {} out of range", a.0)));
        }
        if self.is_terminal(s) {
            let observation = self.sample_observation(s, a, rng)?;
            return Ok(GenOutput {
                next_state: s.clone(),
                observation,
                reward: self.terminal_reward(),
                terminal: true,
            });
        }
        let reward = self.reward(s, a);
        let next_state = self.sample_transition(s, a, rng);
        let observation = self.sample_observation(&next_state, a, rng)?;
        Ok(GenOutput {
            next_state,
            observation,
            reward,
            terminal: false,
        })
    }
}

/// A model whose state splits into a sampled block `s^π` and a block `s^α`
/// that is conditionally Gaussian given the `s^π` path.
///
/// Given `(s^π, s'^π, a)` the tractable block moves as
/// `s'^α = f(s^α; s^π, s'^π, a) + w`, `w ~ N(0, Q(s^π, s'^π, a))`, and is
/// observed through `o = h(s^α; s^π) + v`, `v ~ N(0, R)`.
pub trait RbFactoredModel: PomdpModel {
    fn pi_dim(&self) -> usize;
    fn alpha_dim(&self) -> usize;

    /// Splits a full state into `(s^π, s^α)`.
    fn split(&self, s: &State) -> (DVector<f64>, DVector<f64>);

    /// Inverse of [`RbFactoredModel::split`].
    fn join(&self, s_pi: &DVector<f64>, s_alpha: &DVector<f64>) -> State;

    /// Draws `s'^π ~ p(· | s^π, a)`.
    fn sample_pi_transition(&self, s_pi: &DVector<f64>, a: ActionId, rng: &mut RngStream) -> DVector<f64>;

    /// Noise-free conditional dynamics `f`.
    fn tractable_dynamics(
        &self,
        s_alpha: &DVector<f64>,
        s_pi: &DVector<f64>,
        s_pi_next: &DVector<f64>,
        a: ActionId,
    ) -> DVector<f64>;

    /// Additive process-noise covariance `Q`.
    fn tractable_noise(&self, s_pi: &DVector<f64>, s_pi_next: &DVector<f64>, a: ActionId) -> DMatrix<f64>;

    /// Noise-free observation `h(s^α; s^π)`.
    fn observe_tractable(&self, s_alpha: &DVector<f64>, s_pi: &DVector<f64>) -> Observation;

    /// Observation-noise covariance `R`.
    fn observation_noise(&self) -> DMatrix<f64>;

    /// Draws `s'` by sampling `s'^π` and then `s'^α` from its conditional
    /// Gaussian. Agrees in distribution with `sample_transition` wherever the
    /// model's joint transition is unconstrained.
    fn sample_factored_transition(&self, s: &State, a: ActionId, rng: &mut RngStream) -> State {
        let (s_pi, s_alpha) = self.split(s);
        let s_pi_next = self.sample_pi_transition(&s_pi, a, rng);
        let mean = self.tractable_dynamics(&s_alpha, &s_pi, &s_pi_next, a);
        let l = psd_sqrt(&self.tractable_noise(&s_pi, &s_pi_next, a));
        let z = DVector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
        self.join(&s_pi_next, &(mean + l * z))
    }
}
