//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The five-equation STC identification did not reach the residual target.
    #[error("parameter identification did not converge after {iterations} iterations (max residual {max_residual:.3e})")]
    IdentificationFailure {
        iterations: usize,
        max_residual: f64,
        residuals: [f64; 5],
    },

    /// Exponent argument of the diode equation exceeded the overflow guard.
    #[error("diode exponent argument {argument:.1} exceeds guard {limit:.0}")]
    ExponentOverflow { argument: f64, limit: f64 },

    /// An iterative solve failed to converge.
    #[error("numeric solve failed: {0}")]
    SolverFailure(String),

    /// The measured operating point puts the closed-form inversion's
    /// denominator near zero.
    #[error("degenerate operating point (v={v:.3} V, i={i:.3} A): denominator {denominator:.3e} A")]
    DegenerateOperatingPoint { v: f64, i: f64, denominator: f64 },

    /// An irradiance estimate fell outside the accepted range.
    #[error("estimate {s_hat:.2} W/m2 outside accepted range ({min:.1}, {max:.1}]")]
    RejectedSample { s_hat: f64, min: f64, max: f64 },

    /// The sample has no pyranometer reading.
    #[error("sample at t={timestamp} s has no GNI channel")]
    MissingGni { timestamp: f64 },

    /// A stateful estimator produced a non-finite state.
    #[error("estimator diverged at t={timestamp} s: {reason}")]
    EstimatorDivergence { timestamp: f64, reason: String },

    /// Kalman update could not be performed.
    #[error("filter singularity: {0}")]
    FilterSingularity(String),

    /// Not enough samples to compute the requested quantity.
    #[error("insufficient history: need {needed} samples, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    /// k-means left a cluster empty even after re-seeded restarts.
    #[error("empty cluster persisted after {retries} re-seeded restarts")]
    EmptyCluster { retries: usize },

    /// A precondition or configuration value is invalid.
    #[error("invalid {what}: {why}")]
    InvalidInput { what: &'static str, why: String },

    /// A data file is malformed.
    #[error("{path}:{line}: {message}")]
    MalformedData {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::InvalidInput {
            what,
            why: why.into(),
        }
    }

    /// Process exit code class for the CLI: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput { .. } => 2,
            Error::MalformedData { .. } | Error::Io(_) | Error::MissingGni { .. } => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
