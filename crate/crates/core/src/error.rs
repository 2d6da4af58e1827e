//! Error types shared across the toolkit.

use thiserror::Error;

/// Errors produced by map, partition, scheme and thermodynamic operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Point lies outside the map's domain `[0, 1]`.
    #[error("point {0} outside [0,1]")]
    Domain(f64),

    /// Derivative requested at a non-differentiable branch junction; carries
    /// the one-sided values.
    #[error("non-differentiable junction at {x}: one-sided derivatives {left}, {right}")]
    Junction { x: f64, left: f64, right: f64 },

    /// Value outside the image of a monotone branch.
    #[error("value {0} outside branch image")]
    Range(f64),

    /// Invalid configuration or malformed input description.
    #[error("config error: {0}")]
    Config(String),

    /// Operation precondition violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative estimate failed to converge; carries the partial sequence.
    #[error("convergence failure: {context}")]
    Convergence { context: String, partial: Vec<f64> },

    /// Partition sums diverge (no decay across increasing truncation); the
    /// requested quantity is undefined rather than merely unconverged.
    #[error("divergent partition sum: {0}")]
    Divergence(String),

    /// No inducing-scheme branch could be built.
    #[error("empty inducing scheme: {0}")]
    EmptyScheme(String),

    /// Root bracketing for the temperature solve failed; carries the endpoint
    /// pressures observed after bracket expansion.
    #[error("no sign change in bracket [{lo}, {hi}]: pressures {p_lo}, {p_hi}")]
    Bracket { lo: f64, hi: f64, p_lo: f64, p_hi: f64 },

    /// Measures have disjoint supports on the comparison grid.
    #[error("disjoint supports: no grid cell carries both measures")]
    DisjointSupports,

    /// A return-time integral diverges under the fitted tail.
    #[error("integrability failure: {0}")]
    Integrability(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 convergence, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Precondition(_) | Error::Json(_) => 2,
            Error::Convergence { .. } | Error::Bracket { .. } => 3,
            Error::Divergence(_) | Error::Integrability(_) => 4,
            _ => 2,
        }
    }
}
