use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Fock cutoff on site {site} is {cutoff}; every site needs at least 2 levels")]
    InvalidCutoff { site: usize, cutoff: usize },

    #[error("Hilbert space dimension exceeds the budget of {limit} states")]
    DimensionOverflow { limit: usize },

    #[error("site index {site} out of range for a network of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("coupling matrix must be real symmetric with zero diagonal (entry ({row}, {col}))")]
    InvalidCoupling { row: usize, col: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("operator is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("z = {z} lies within {distance:e} of a single-particle pole")]
    PoleProximity { z: Complex64, distance: f64 },

    #[error("Newton iteration stalled: derivative underflow at z = {z}")]
    DerivativeUnderflow { z: Complex64 },

    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("network topology not supported: {0}")]
    UnsupportedTopology(String),

    #[error("drive-signal propagator vanishes at this operating point (single-particle dark state)")]
    DarkStateSingularity,

    #[error("fit window holds {points} usable points; at least 5 are required")]
    FitWindowTooNarrow { points: usize },

    #[error("steady state not reached after t = {time}: residual {residual:e}")]
    SteadyStateNotConverged { time: f64, residual: f64 },

    #[error("linear-solve mode needs Liouville dimension <= {limit}, got {found}")]
    LiouvilleTooLarge { limit: usize, found: usize },

    #[error("steady-state linear system is singular")]
    SingularGenerator,

    #[error("integrator failed at t = {time}: {reason}")]
    Integrator { time: f64, reason: String },

    #[error("mean occupation {value:e} on site {site} is too small for a normalized correlation")]
    UndefinedCorrelation { site: usize, value: f64 },

    #[error("incompatible series: {0}")]
    IncompatibleSeries(String),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
