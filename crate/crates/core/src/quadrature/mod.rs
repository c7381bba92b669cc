//! Deterministic Gaussian quadrature: Gauss–Hermite rules, tensor products,
//! Smolyak sparse grids and Gaussian expectation operators.
//!
//! All rules live on the standard-normal scale. [`GaussianStat`] maps them
//! onto an arbitrary Gaussian through a lower-triangular square root of its
//! covariance.

mod gaussian;
mod multi;
mod univariate;

pub use gaussian::{expect_gaussian, expect_gaussian_vec, GaussianStat};
pub use multi::{smolyak_rule, tensor_rule, Growth, MultiRule, RuleDescriptor, MERGE_TOL};
pub use univariate::{gauss_hermite_rule, univariate_rule, RuleFamily, UnivariateRule, MAX_POINTS};
