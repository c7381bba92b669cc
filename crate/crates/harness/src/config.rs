//! Experiment configuration, read from TOML.
//!
//! Every section and field is optional and falls back to the pinned
//! localization scenario. `schema_version` must match
//! [`SCHEMA_VERSION`] when present.

use std::path::{Path, PathBuf};

use rbpomdp::filters::{UkfParams, DEFAULT_RESAMPLE_THRESHOLD};
use rbpomdp::localization::{LandmarkMap, LocalizationModel, WorldConfig};
use rbpomdp::planners::PlannerParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    Rbpf,
    Sirpf,
    /// Belief collapsed onto the true state after every step.
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub kind: FilterKind,
    pub particles: usize,
    pub resample_threshold: f64,
    /// Per-component jitter standard deviation after SIR resampling.
    pub jitter: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            kind: FilterKind::Rbpf,
            particles: 100,
            resample_threshold: DEFAULT_RESAMPLE_THRESHOLD,
            jitter: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Pomcpow,
    RbPomcpow,
    RbPomcp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RolloutKind {
    HeadingToGoal,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    pub rollout: RolloutKind,
    pub params: PlannerParams,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            kind: PlannerKind::RbPomcpow,
            rollout: RolloutKind::HeadingToGoal,
            params: PlannerParams {
                k_action: WorldConfig::default().actions.len() as f64,
                ..PlannerParams::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub episodes: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Run one untimed episode before the timed ones.
    pub warmup: bool,
    /// Worker threads for parallel episodes; 0 uses every core.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            episodes: 20,
            seed: 0,
            output_dir: PathBuf::from("results"),
            warmup: true,
            threads: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Particle counts for the filter timing table.
    pub particles: Vec<usize>,
    /// Recorded action/observation sequences replayed per particle count.
    pub filter_sequences: usize,
    /// Timed passes per (filter, count); per script the fastest is kept.
    pub timing_repeats: usize,
    /// Sparse-grid levels swept for RB-POMCPOW.
    pub q_levels: Vec<usize>,
    /// Iteration budget for RB-POMCPOW in the level sweep.
    pub rb_iterations: usize,
    pub rb_particles: usize,
    /// Iteration budgets swept for POMCPOW.
    pub pomcpow_iterations: Vec<usize>,
    pub pomcpow_particles: usize,
    /// Also run POMCPOW on an RBPF belief, drawing full states from it.
    pub pomcpow_on_rbpf: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            particles: vec![100, 1000, 10000],
            filter_sequences: 5,
            timing_repeats: 5,
            q_levels: vec![1, 2, 3, 4, 5],
            rb_iterations: 50,
            rb_particles: 100,
            pomcpow_iterations: vec![50, 100, 500, 1000],
            pomcpow_particles: 1000,
            pomcpow_on_rbpf: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencyConfig {
    pub episodes: usize,
    pub rb_particles: usize,
    pub sir_particles: usize,
    /// Two-sided coverage of the χ² acceptance interval.
    pub coverage: f64,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self {
            episodes: 20,
            rb_particles: 100,
            sir_particles: 1000,
            coverage: 0.95,
        }
    }
}

/// Top-level experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub world: WorldConfig,
    pub map: LandmarkMap,
    pub filter: FilterConfig,
    pub ukf: UkfParams,
    pub planner: PlannerConfig,
    pub run: RunConfig,
    pub bench: BenchConfig,
    pub consistency: ConsistencyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            world: WorldConfig::default(),
            map: LandmarkMap::default(),
            filter: FilterConfig::default(),
            ukf: UkfParams::default(),
            planner: PlannerConfig::default(),
            run: RunConfig::default(),
            bench: BenchConfig::default(),
            consistency: ConsistencyConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "schema_version {} not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let section = |name: &str, r: rbpomdp::Result<()>| r.map_err(|e| HarnessError::Config(format!("[{name}] {e}")));
        section("world", self.world.validate())?;
        section("map", self.map.validate())?;
        section("ukf", self.ukf.validate())?;
        section("planner.params", self.planner.params.validate())?;
        if self.filter.particles == 0 && self.filter.kind != FilterKind::Oracle {
            return Err(HarnessError::Config("filter needs at least one particle".into()));
        }
        if !(self.filter.resample_threshold > 0.0 && self.filter.resample_threshold <= 1.0) {
            return Err(HarnessError::Config("resample_threshold must lie in (0, 1]".into()));
        }
        if self.filter.jitter < 0.0 {
            return Err(HarnessError::Config("jitter must be non-negative".into()));
        }
        let rb_planner = matches!(self.planner.kind, PlannerKind::RbPomcpow | PlannerKind::RbPomcp);
        if rb_planner && self.filter.kind == FilterKind::Sirpf {
            return Err(HarnessError::Config(
                "Rao-Blackwellized planners need an rbpf or oracle filter".into(),
            ));
        }
        if self.run.episodes == 0 {
            return Err(HarnessError::Config("episodes must be positive".into()));
        }
        if !(self.consistency.coverage > 0.0 && self.consistency.coverage < 1.0) {
            return Err(HarnessError::Config("consistency coverage must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<LocalizationModel> {
        Ok(LocalizationModel::new(self.world.clone(), self.map.clone())?)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    /// Output directory and thread count do not change results and are
    /// left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.run.output_dir = PathBuf::new();
        canonical.run.threads = 0;
        let json = serde_json::to_string(&canonical).expect("config always serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
