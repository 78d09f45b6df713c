use thiserror::Error;

use crate::variational::MinimizeReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("spectral functions are tied to different bases")]
    BasisMismatch,

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("eigensolver did not converge after {iterations} iterations (max residual {residual:e})")]
    EigenNonConvergence { iterations: usize, residual: f64 },

    #[error("non-finite nonlinearity value at node {node} (x = {coords:?}, u = {value})")]
    NonFinite {
        node: usize,
        coords: Vec<f64>,
        value: f64,
    },

    #[error("energy is not coercive: margin {margin} (A must be below alpha_k^2 / M_beta_k)")]
    NotCoercive { margin: f64 },

    #[error("minimizer did not converge in {} iterations (gradient norm {:e})", .report.iterations, .report.gradient_norm)]
    NotConverged { report: Box<MinimizeReport> },

    #[error("line search failed: step underflow at iteration {}", .report.iterations)]
    LineSearchFailure { report: Box<MinimizeReport> },

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable tag used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDomain(_) => "invalid_domain",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::BasisMismatch => "basis_mismatch",
            Error::InvalidBasis(_) => "invalid_basis",
            Error::EigenNonConvergence { .. } => "eigen_non_convergence",
            Error::NonFinite { .. } => "non_finite",
            Error::NotCoercive { .. } => "not_coercive",
            Error::NotConverged { .. } => "not_converged",
            Error::LineSearchFailure { .. } => "line_search_failure",
            Error::Config { .. } => "config",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
