//! Command implementations behind the `l0erm` binary: sample
//! generation, single fits, the Monte Carlo experiment harness, and the
//! bound-diagnostics report. The binary in `main.rs` only parses
//! arguments and maps errors to exit codes.

use std::fmt;

pub mod commands;
pub mod config;
pub mod output;

/// Failure classes with fixed exit codes: usage 2, solver 3, I/O 4.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Solver(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Solver(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(msg) | Self::Solver(msg) | Self::Io(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

impl From<l0erm::Error> for CliError {
    fn from(e: l0erm::Error) -> Self {
        match &e {
            l0erm::Error::InvalidArgument(_) => Self::Usage(e.to_string()),
            l0erm::Error::SolverFailure(_)
            | l0erm::Error::FitFailure { .. }
            | l0erm::Error::Factorization(_) => Self::Solver(e.to_string()),
            l0erm::Error::Csv(_) | l0erm::Error::Io(_) => Self::Io(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(e.to_string())
    }
}

/// Size the rayon pool that repetitions fan out across. `None` keeps
/// the default (one worker per core).
pub fn init_workers(workers: Option<usize>) {
    if let Some(n) = workers {
        if n == 0 {
            log::warn!("ignoring worker count 0");
            return;
        }
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            log::warn!("worker pool already initialized; --workers ignored");
        }
    }
}
