//! Differentially private training for smooth strongly convex objectives.
//!
//! The crate implements noisy projected stochastic gradient descent whose
//! released final iterate carries a Langevin-diffusion Rényi privacy bound,
//! together with the matching privacy accountant, noise/iteration
//! calibrators, and independent verification oracles:
//!
//! - [`types`]: datasets, L2 projection balls, step-size schedules, seeds.
//! - [`losses`]: regularized multinomial logistic regression and a quadratic
//!   mean-estimation loss, each with certified (L, λ, β) constants.
//! - [`sgld`]: the noisy trainer, a clipped-Gaussian baseline, and plain SGD,
//!   all reproducible from a single 64-bit seed.
//! - [`accountant`]: Rényi bounds for constant/decreasing/arbitrary step
//!   schedules, the per-step recursion, (ε, δ) conversion, and calibrators.
//! - [`oracle`]: closed-form Gaussian dynamics and Monte-Carlo risk checks
//!   that verify the privacy and utility bounds numerically.
//! - [`synthetic`]: seeded Gaussian-blob fixtures for benchmarks and tests.

pub mod accountant;
pub mod error;
pub mod losses;
pub mod oracle;
pub mod rng;
pub mod sgld;
pub mod synthetic;
pub mod types;

pub use error::{Error, Result};
pub use losses::{LogisticLoss, LossConstants, LossModel, QuadraticLoss};
pub use types::{Dataset, L2Ball, RunSeed, StepSchedule};
