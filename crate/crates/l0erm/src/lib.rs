//! Sparse linear binary classification by exact minimization of the
//! empirical misclassification risk plus an l0 penalty on the number of
//! selected features.
//!
//! The penalized problem
//!
//! ```text
//! min over theta in a box:  (1/n) sum_i 1{y_i != 1{x1_i + xt_i' theta >= 0}}  +  lambda * ||theta||_0
//! ```
//!
//! is reformulated as a mixed integer linear program with one binary
//! indicator per observation and one on-off binary per selectable feature,
//! and solved exactly by the embedded branch-and-bound solver in [`milp`].
//! The crate also ships the surrounding study machinery: synthetic data
//! generators with a known Bayes rule ([`dgp`]), penalty tuning rules
//! ([`tuning`]), a coordinate-descent logit-lasso baseline ([`lasso`]),
//! performance metrics ([`metrics`]), finite-sample bound diagnostics
//! ([`theory`]), and a reproducible Monte Carlo harness ([`experiment`]).
//!
//! With the default `parallel` feature the harness fans repetitions out
//! across a rayon thread pool; disabling it yields a fully sequential
//! build with identical outputs.

pub mod classifier;
pub mod data;
pub mod dgp;
pub mod erm;
pub mod error;
pub mod experiment;
pub mod lasso;
pub mod metrics;
pub mod milp;
pub mod theory;
pub mod tuning;

pub use classifier::{empirical_risk, l0_norm, predict, LinearClassifier, ParameterBox};
pub use data::Dataset;
pub use erm::FitResult;
pub use error::Error;
pub use milp::{MilpProblem, MilpResult, MilpStatus};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Default tolerance below which a coefficient counts as zero.
pub const SELECTION_TOL: f64 = 1e-6;
