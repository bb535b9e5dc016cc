//! Characteristic-function goodness-of-fit tests for multivariate skewed
//! distributions.

pub mod distributions;
pub mod error;
pub mod estimation;
pub mod gof;
pub mod kernels;
pub mod linalg;
pub mod optim;
pub mod quad;
pub mod rng;
pub mod sample;
pub mod special;
pub mod statistic;
pub mod validation;

pub use distributions::{Family, FamilySpec};
pub use error::{Error, Result};
pub use kernels::KernelSpec;
pub use rng::{RandomStream, SeedSpec};
pub use sample::Sample;

/// Package version with the `git describe` of the source tree when available.
pub const VERSION: &str = env!("SKEWGOF_VERSION");
