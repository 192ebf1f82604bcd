use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter {name} must be finite, got {value}")]
    NonFiniteParameter { name: &'static str, value: f64 },

    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error(
        "condition sigma^2 <= 4*theta*kappa violated: sigma^2 = {sigma_sq} > 4*theta*kappa = {bound} (BESQ dimension {delta} < 1)"
    )]
    FellerTypeViolation { sigma_sq: f64, bound: f64, delta: f64 },

    #[error("unknown test function '{0}' (expected poly, exp_neg or sin)")]
    UnknownFunction(String),

    #[error("test function '{0}' is not smooth; only C^q functions of polynomial growth are supported")]
    NonSmoothFunction(String),

    #[error("test function '{name}' is missing arguments: {detail}")]
    MissingArgs { name: String, detail: String },

    #[error("invalid argument for test function '{name}': {detail}")]
    InvalidFunctionArgs { name: String, detail: String },

    #[error("derivative order {order} exceeds the smoothness q = {q} of the test function")]
    OrderExceedsQ { order: usize, q: usize },

    #[error("insufficient smoothness: request needs order {needed} but q = {q}")]
    InsufficientSmoothness { needed: usize, q: usize },

    #[error("iterated-integral nesting depth {depth} exceeds the cap {cap}")]
    NestingTooDeep { depth: usize, cap: usize },

    #[error("BESQ dimension {0} is below 1")]
    DimensionTooSmall(f64),

    #[error("affine mixture requested for integer dimension {0}; use the integer sampler")]
    AffineMixOnInteger(f64),

    #[error("finite-difference step h = {h} exceeds x = {x}")]
    StepTooLarge { h: f64, x: f64 },

    #[error("quadrature did not converge: estimated error {error:e} after {intervals} intervals")]
    QuadratureNotConverged { error: f64, intervals: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
