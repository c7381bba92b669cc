//! Closed-loop episodes: plan, act, observe, update, log.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rbpomdp::filters::{nees, rbpf_update, sirpf_update, RbBelief, SirBelief, UkfParams, UpdateReport};
use rbpomdp::linalg::wrap_angle as wrap;
use rbpomdp::localization::{HeadingToGoal, LocalizationModel};
use rbpomdp::planners::{Pomcpow, RbPomcp, RbPomcpow, RolloutPolicy, RootSampler, UniformRandom};
use rbpomdp::quadrature::GaussianStat;
use rbpomdp::{ActionId, Error, Observation, PomdpModel, RngStream, State};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, FilterConfig, FilterKind, PlannerConfig, PlannerKind, RolloutKind};
use crate::error::Result;

/// Seed streams handed to each role inside one episode.
pub struct EpisodeStreams {
    pub world: RngStream,
    pub filter: RngStream,
    pub planner: RngStream,
    pub init: RngStream,
}

impl EpisodeStreams {
    /// Streams for episode `index` under `base_seed`. Independent of how
    /// many other episodes run and in which order.
    pub fn new(base_seed: u64, index: u64) -> Self {
        let ep = RngStream::new(base_seed).child(index);
        Self {
            world: ep.child(0),
            filter: ep.child(1),
            planner: ep.child(2),
            init: ep.child(3),
        }
    }
}

/// Any of the supported beliefs over the localization state.
#[derive(Clone, Debug)]
pub enum Belief {
    Rb(RbBelief),
    Sir(SirBelief),
    /// Point mass on the true state.
    Oracle(State),
}

/// Mean and covariance of a belief, heading averaged on the circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefSummary {
    pub mean: [f64; 3],
    pub cov: [[f64; 3]; 3],
}

impl BeliefSummary {
    pub fn position_mean(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.mean[0], self.mean[1]])
    }

    pub fn position_cov(&self) -> DMatrix<f64> {
        DMatrix::from_fn(2, 2, |i, j| self.cov[i][j])
    }
}

/// Moments of a weighted mixture of `(weight, [ξ, η, θ], position cov)`
/// components. Headings are unwrapped around their circular mean.
fn mixture_summary<'a, I>(components: I) -> BeliefSummary
where
    I: Iterator<Item = (f64, [f64; 3], Option<&'a DMatrix<f64>>)> + Clone,
{
    let (mut sin, mut cos) = (0.0, 0.0);
    for (w, m, _) in components.clone() {
        sin += w * m[2].sin();
        cos += w * m[2].cos();
    }
    let heading = sin.atan2(cos);
    let mut mean = [0.0; 3];
    for (w, m, _) in components.clone() {
        mean[0] += w * m[0];
        mean[1] += w * m[1];
        mean[2] += w * wrap(m[2] - heading);
    }
    let mut cov = [[0.0; 3]; 3];
    for (w, m, p) in components {
        let e = [m[0] - mean[0], m[1] - mean[1], wrap(m[2] - heading) - mean[2]];
        for i in 0..3 {
            for j in 0..3 {
                let inner = match (p, i < 2 && j < 2) {
                    (Some(p), true) => p[(i, j)],
                    _ => 0.0,
                };
                cov[i][j] += w * (inner + e[i] * e[j]);
            }
        }
    }
    mean[2] = wrap(heading + mean[2]);
    BeliefSummary { mean, cov }
}

impl Belief {
    pub fn initial(
        filter: &FilterConfig,
        ukf: UkfParams,
        model: &LocalizationModel,
        rng: &mut RngStream,
    ) -> Result<Self> {
        Ok(match filter.kind {
            FilterKind::Rbpf => {
                Belief::Rb(model.initial_rb_belief(filter.particles, filter.resample_threshold, ukf, rng)?)
            }
            FilterKind::Sirpf => Belief::Sir(model.initial_sir_belief(
                filter.particles,
                filter.resample_threshold,
                filter.jitter,
                rng,
            )?),
            FilterKind::Oracle => Belief::Oracle(model.start_state().to_vector()),
        })
    }

    /// Folds in `(a, o)`. The oracle belief jumps to `truth_next` and
    /// reports nothing.
    pub fn update(
        &mut self,
        a: ActionId,
        o: &Observation,
        truth_next: &State,
        model: &LocalizationModel,
        rng: &mut RngStream,
    ) -> Result<Option<UpdateReport>> {
        Ok(match self {
            Belief::Rb(b) => Some(rbpf_update(b, a, o, model, rng)?),
            Belief::Sir(b) => Some(sirpf_update(b, a, o, model, rng)?),
            Belief::Oracle(s) => {
                *s = truth_next.clone();
                None
            }
        })
    }

    pub fn summary(&self) -> BeliefSummary {
        match self {
            Belief::Rb(b) => mixture_summary(b.particles.iter().map(|p| {
                (
                    p.weight,
                    [p.theta.mean[0], p.theta.mean[1], p.s_pi[0]],
                    Some(&p.theta.cov),
                )
            })),
            Belief::Sir(b) => mixture_summary(
                b.particles
                    .iter()
                    .zip(&b.weights)
                    .map(|(s, &w)| (w, [s[0], s[1], s[2]], None)),
            ),
            Belief::Oracle(s) => BeliefSummary {
                mean: [s[0], s[1], s[2]],
                cov: [[0.0; 3]; 3],
            },
        }
    }

    /// RBPF view of this belief, used by the factored planners. An oracle
    /// belief becomes one particle with a point-mass position.
    fn as_rb(&self) -> Option<std::borrow::Cow<'_, RbBelief>> {
        match self {
            Belief::Rb(b) => Some(std::borrow::Cow::Borrowed(b)),
            Belief::Oracle(s) => {
                let theta = GaussianStat::dirac(DVector::from_vec(vec![s[0], s[1]]));
                RbBelief::new(vec![(DVector::from_element(1, s[2]), theta)], 1.0, UkfParams::default())
                    .ok()
                    .map(std::borrow::Cow::Owned)
            }
            Belief::Sir(_) => None,
        }
    }
}

impl RootSampler<LocalizationModel> for Belief {
    fn sample_state(&self, model: &LocalizationModel, rng: &mut RngStream) -> State {
        match self {
            Belief::Rb(b) => b.sample_state(model, rng),
            Belief::Sir(b) => RootSampler::<LocalizationModel>::sample_state(b, model, rng),
            Belief::Oracle(s) => s.clone(),
        }
    }
}

/// Runs the configured planner once from `belief`.
pub fn plan(
    cfg: &PlannerConfig,
    ukf: UkfParams,
    model: &LocalizationModel,
    belief: &Belief,
    rng: &mut RngStream,
) -> Result<ActionId> {
    let policy: &dyn RolloutPolicy<LocalizationModel> = match cfg.rollout {
        RolloutKind::HeadingToGoal => &HeadingToGoal,
        RolloutKind::Random => &UniformRandom,
    };
    let rb = || {
        belief
            .as_rb()
            .ok_or_else(|| Error::Argument("factored planner needs an RBPF or oracle belief".into()))
    };
    Ok(match cfg.kind {
        PlannerKind::Pomcpow => Pomcpow::new(model, policy, cfg.params)?.search(belief, rng)?.action,
        PlannerKind::RbPomcpow => {
            RbPomcpow::new(model, policy, cfg.params, ukf)?
                .search(&*rb()?, rng)?
                .action
        }
        PlannerKind::RbPomcp => {
            RbPomcp::new(model, policy, cfg.params, ukf)?
                .search(&*rb()?, rng)?
                .action
        }
    })
}

/// One logged step. Row `t` holds the true state after the step, the
/// posterior after the update, and the reward collected on the step. A
/// final row without an action records the terminal reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub state: [f64; 3],
    pub belief: BeliefSummary,
    pub ess_normalized: Option<f64>,
    pub action: Option<usize>,
    pub reward: f64,
    pub cumulative_discounted_reward: f64,
    pub plan_time_ms: f64,
    pub update_time_ms: f64,
    pub nees: Option<f64>,
    pub nis: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Goal,
    StepCap,
    DegenerateBelief,
}

impl Outcome {
    pub fn solved(self) -> bool {
        self == Outcome::Goal
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode: u64,
    pub outcome: Outcome,
    pub discounted_return: f64,
    pub steps: Vec<StepRecord>,
}

impl EpisodeResult {
    pub fn mean_plan_ms(&self) -> f64 {
        mean_of(self.steps.iter().filter(|r| r.action.is_some()).map(|r| r.plan_time_ms))
    }

    pub fn mean_update_ms(&self) -> f64 {
        mean_of(
            self.steps
                .iter()
                .filter(|r| r.action.is_some())
                .map(|r| r.update_time_ms),
        )
    }

    /// Number of actions taken.
    pub fn actions_taken(&self) -> usize {
        self.steps.iter().filter(|r| r.action.is_some()).count()
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Position NEES of a summary against the true state, when the position
/// covariance is invertible.
pub fn position_nees(summary: &BeliefSummary, truth: &State) -> Option<f64> {
    let t = DVector::from_vec(vec![truth[0], truth[1]]);
    nees(&summary.position_mean(), &t, &summary.position_cov())
        .ok()
        .map(|s| s.value)
}

/// Runs episode `index` of `cfg` to the goal, the step cap, or a
/// degenerate belief. Configuration errors surface before any step.
pub fn run_episode(cfg: &ExperimentConfig, model: &LocalizationModel, index: u64) -> Result<EpisodeResult> {
    cfg.validate()?;
    let mut streams = EpisodeStreams::new(cfg.run.seed, index);
    let mut belief = Belief::initial(&cfg.filter, cfg.ukf, model, &mut streams.init)?;
    let mut s = model.start_state().to_vector();
    let gamma = model.discount();
    let mut cumulative = 0.0;
    let mut discount = 1.0;
    let mut steps = Vec::new();
    let mut outcome = Outcome::StepCap;

    for t in 0..=model.cfg.max_steps {
        if model.is_terminal(&s) {
            let reward = model.terminal_reward();
            cumulative += discount * reward;
            steps.push(StepRecord {
                step: t,
                state: [s[0], s[1], s[2]],
                belief: belief.summary(),
                ess_normalized: None,
                action: None,
                reward,
                cumulative_discounted_reward: cumulative,
                plan_time_ms: 0.0,
                update_time_ms: 0.0,
                nees: None,
                nis: None,
            });
            outcome = Outcome::Goal;
            break;
        }
        if t == model.cfg.max_steps {
            break;
        }

        let clock = Instant::now();
        let a = plan(&cfg.planner, cfg.ukf, model, &belief, &mut streams.planner)?;
        let plan_time_ms = ms_since(clock);

        let reward = model.reward(&s, a);
        let s_next = model.sample_transition(&s, a, &mut streams.world);
        let o = model.sample_observation(&s_next, a, &mut streams.world)?;

        let clock = Instant::now();
        let report = match belief.update(a, &o, &s_next, model, &mut streams.filter) {
            Ok(r) => r,
            Err(crate::error::HarnessError::Model(Error::DegenerateBelief)) => {
                outcome = Outcome::DegenerateBelief;
                break;
            }
            Err(e) => return Err(e),
        };
        let update_time_ms = ms_since(clock);

        cumulative += discount * reward;
        discount *= gamma;
        let summary = belief.summary();
        steps.push(StepRecord {
            step: t,
            state: [s_next[0], s_next[1], s_next[2]],
            nees: position_nees(&summary, &s_next),
            belief: summary,
            ess_normalized: report.as_ref().map(UpdateReport::ess_normalized),
            action: Some(a.0),
            reward,
            cumulative_discounted_reward: cumulative,
            plan_time_ms,
            update_time_ms,
            nis: report.as_ref().and_then(|r| r.nis()).map(|s| s.value),
        });
        s = s_next;
    }

    Ok(EpisodeResult {
        episode: index,
        outcome,
        discounted_return: cumulative,
        steps,
    })
}

/// Recomputes the discounted return from the per-step rewards.
pub fn recompute_return(steps: &[StepRecord], gamma: f64) -> f64 {
    let mut discount = 1.0;
    let mut total = 0.0;
    for r in steps {
        total += discount * r.reward;
        if r.action.is_some() {
            discount *= gamma;
        }
    }
    total
}

/// One step of a scripted run: the action taken, the observation that
/// followed, and the true state it was drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptedStep {
    pub action: ActionId,
    pub observation: Observation,
    pub truth: State,
}

/// Drives the true state with [`HeadingToGoal`] until the goal or the
/// step cap, recording what a filter would see.
pub fn scripted_run(model: &LocalizationModel, rng: &mut RngStream) -> Result<Vec<ScriptedStep>> {
    let mut s = model.start_state().to_vector();
    let mut out = Vec::new();
    for _ in 0..model.cfg.max_steps {
        if model.is_terminal(&s) {
            break;
        }
        let a = HeadingToGoal::choose(model, &s);
        let s_next = model.sample_transition(&s, a, rng);
        let o = model.sample_observation(&s_next, a, rng)?;
        out.push(ScriptedStep {
            action: a,
            observation: o,
            truth: s_next.clone(),
        });
        s = s_next;
    }
    Ok(out)
}

/// Per-step result of replaying a scripted run through a filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterStep {
    pub step: usize,
    pub ess_normalized: f64,
    pub update_time_ms: f64,
    pub nees: Option<f64>,
    pub nis: Option<f64>,
    pub belief: BeliefSummary,
}

/// Replays `script` through a fresh belief. Stops early, keeping the
/// partial trace, if the belief degenerates.
pub fn replay_filter(
    filter: &FilterConfig,
    ukf: UkfParams,
    model: &LocalizationModel,
    script: &[ScriptedStep],
    rng: &mut RngStream,
) -> Result<Vec<FilterStep>> {
    let mut belief = Belief::initial(filter, ukf, model, rng)?;
    let mut out = Vec::with_capacity(script.len());
    for (t, step) in script.iter().enumerate() {
        let clock = Instant::now();
        let report = match belief.update(step.action, &step.observation, &step.truth, model, rng) {
            Ok(r) => r,
            Err(crate::error::HarnessError::Model(Error::DegenerateBelief)) => break,
            Err(e) => return Err(e),
        };
        let update_time_ms = ms_since(clock);
        let summary = belief.summary();
        out.push(FilterStep {
            step: t,
            ess_normalized: report.as_ref().map_or(1.0, UpdateReport::ess_normalized),
            update_time_ms,
            nees: position_nees(&summary, &step.truth),
            nis: report.as_ref().and_then(|r| r.nis()).map(|s| s.value),
            belief: summary,
        });
    }
    Ok(out)
}
