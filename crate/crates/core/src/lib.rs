//! Rao-Blackwellized belief filtering and online planning for POMDPs whose
//! state splits into a sampled block and a conditionally Gaussian block.
//!
//! - [`filters`]: RBPF with per-particle UKF, bootstrap SIR filter,
//!   systematic resampling, NEES/NIS statistics.
//! - [`quadrature`]: Gauss–Hermite, tensor and Smolyak rules.
//! - [`planners`]: RB-POMCPOW, RB-POMCP and the sampling POMCPOW baseline.
//! - [`localization`]: range-bearing localization benchmark.
//! - [`testbed`]: small models with exact answers.

pub mod error;
pub mod filters;
pub mod linalg;
pub mod localization;
pub mod model;
pub mod planners;
pub mod quadrature;
pub mod rng;
pub mod testbed;

pub use error::{Error, Result};
pub use model::{ActionId, GenOutput, Observation, PomdpModel, RbFactoredModel, State, StateBounds};
pub use rng::RngStream;
