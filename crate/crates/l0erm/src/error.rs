//! Crate error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: dimension mismatches, non-finite entries, invalid
    /// bounds and the like.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The LP solver lost its basis beyond repair (singular after
    /// refactorization and anti-cycling fallback) or exceeded its
    /// iteration cap.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// A fit ended without any feasible solution to report.
    #[error("fit failed: {reason} (status {status:?}, {nodes} nodes, best bound {best_bound})")]
    FitFailure {
        reason: String,
        status: crate::milp::MilpStatus,
        nodes: u64,
        best_bound: f64,
    },

    /// Cholesky factorization of a non positive definite matrix.
    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
