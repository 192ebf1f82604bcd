//! Exact squared-Bessel/CIR marginal sampling, symmetrized Monte-Carlo
//! estimators of `∂_x^j ∂_t^i E f(X_t(x))`, the g-function calculus behind
//! them, deterministic oracles, and executable checks of the backward
//! Kolmogorov equation `∂_t u = θ(κ−x)∂_x u + ½σ²x ∂²_x u`.

pub mod cli;
pub mod deriv;
pub mod error;
pub mod gfun;
pub mod mc;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod verify;

pub use error::{Error, Result};
pub use model::{CirParams, DerivRequest, SmoothTestFn};
pub use mc::{Clock, EstimatorConfig, McEstimate};
pub use sampler::Method;
