//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by model evaluation, smoothing, testing and calibration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter vector or state lies outside the admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The stationary normalizer of a candidate model diverges.
    #[error("model is not stationary under the given parameters: {0}")]
    NotStationary(String),

    /// Input shapes or sizes are unusable.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A kernel estimate was requested where the data carry no mass.
    #[error("kernel estimate undefined at ({x}, {y}): empty smoothing window")]
    EmptyWindow { x: f64, y: f64 },

    /// Local-linear design matrix is singular at the evaluation point.
    #[error("degenerate local-linear window at {at}")]
    DegenerateWindow { at: f64 },

    /// Empirical-likelihood target lies outside the convex hull of the
    /// kernel pair values, so no interior Lagrange multiplier exists.
    #[error("target outside the convex hull of kernel pair values")]
    ConvexHull,

    /// A parameter fit produced no usable estimate.
    #[error("fit failed: {0}")]
    FitFailed(String),

    /// Too many bootstrap replicates or study repetitions failed.
    #[error("{what}: {failed} of {total} failed")]
    TooManyFailures {
        what: &'static str,
        failed: usize,
        total: usize,
    },

    /// Generic numerical breakdown (non-finite values, no convergence).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed line in an input file.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Unknown or malformed configuration entry.
    #[error("config: {0}")]
    Config(String),

    /// File system failure.
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Whether the error stems from invalid user input rather than a
    /// numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::NotStationary(_)
                | Error::InvalidInput(_)
                | Error::Parse { .. }
                | Error::Config(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
