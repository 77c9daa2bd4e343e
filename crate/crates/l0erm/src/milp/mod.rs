//! Self-contained exact solver for mixed binary/continuous linear
//! programs: a bounded-variable primal simplex for the LP relaxations and
//! a best-bound branch-and-bound search over the binary variables.
//!
//! The solver is deliberately bare: no presolve, no cutting planes, dense
//! basis inverse. That is enough to prove optimality at desk scale
//! (hundreds of variables) and to return the best incumbent with a valid
//! dual bound when a work or time limit strikes first.

mod branch_bound;
mod lp_file;
mod simplex;

pub use branch_bound::solve_milp;
pub use lp_file::write_lp_format;
pub use simplex::solve_lp;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// One sparse linear constraint `sum coefs . x  sense  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// `(variable index, coefficient)`, one entry per variable, ascending.
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A linear minimization problem over box-bounded variables, some of
/// which are binary.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpProblem {
    /// Objective coefficients (minimization), one per variable.
    pub objective: Vec<f64>,
    /// Constant added to the objective value.
    pub objective_constant: f64,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
    pub is_binary: Vec<bool>,
    pub constraints: Vec<Constraint>,
}

impl MilpProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Check the structural invariants; every solve entry point calls this.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if n == 0 {
            return Err(Error::InvalidArgument("problem has no variables".into()));
        }
        if self.var_lower.len() != n || self.var_upper.len() != n || self.is_binary.len() != n {
            return Err(Error::InvalidArgument(
                "objective/bounds/is_binary lengths differ".into(),
            ));
        }
        if !self.objective.iter().all(|v| v.is_finite()) || !self.objective_constant.is_finite() {
            return Err(Error::InvalidArgument("non-finite objective".into()));
        }
        for j in 0..n {
            let (l, u) = (self.var_lower[j], self.var_upper[j]);
            if l.is_nan() || u.is_nan() || l > u {
                return Err(Error::InvalidArgument(format!(
                    "variable {j} has invalid bounds [{l}, {u}]"
                )));
            }
            if self.is_binary[j] && (l < 0.0 || u > 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "binary variable {j} has bounds [{l}, {u}] outside [0, 1]"
                )));
            }
        }
        for (r, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(Error::InvalidArgument(format!("constraint {r} rhs not finite")));
            }
            let mut prev: Option<usize> = None;
            for &(j, v) in &c.coefs {
                if j >= n {
                    return Err(Error::InvalidArgument(format!(
                        "constraint {r} references variable {j} out of range"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "constraint {r} has non-finite coefficient"
                    )));
                }
                if let Some(p) = prev {
                    if j <= p {
                        return Err(Error::InvalidArgument(format!(
                            "constraint {r} coefficients not strictly ascending by index"
                        )));
                    }
                }
                prev = Some(j);
            }
        }
        Ok(())
    }

    /// Left-hand-side activity of constraint `r` at `x`.
    pub fn activity(&self, r: usize, x: &[f64]) -> f64 {
        self.constraints[r]
            .coefs
            .iter()
            .map(|&(j, v)| v * x[j])
            .sum()
    }

    /// Objective value at `x`, including the constant.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant
            + self
                .objective
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    /// Largest constraint violation and bound violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.num_vars() {
            worst = worst.max(self.var_lower[j] - x[j]).max(x[j] - self.var_upper[j]);
        }
        for (r, c) in self.constraints.iter().enumerate() {
            let act = self.activity(r, x);
            let v = match c.sense {
                Sense::Le => act - c.rhs,
                Sense::Ge => c.rhs - act,
                Sense::Eq => (act - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}

/// Outcome of a linear-programming relaxation solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Variable values; meaningful only when `status == Optimal`.
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: u64,
}

/// Outcome of a branch-and-bound solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MilpStatus {
    /// Proved optimal within the gap tolerance.
    Optimal,
    /// A limit struck first; the incumbent (if any) is the best found and
    /// `best_bound` is still a valid bound.
    FeasibleLimitHit,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct MilpResult {
    pub status: MilpStatus,
    pub incumbent: Option<Vec<f64>>,
    /// Objective of the incumbent; `+inf` when there is none.
    pub incumbent_objective: f64,
    /// Valid lower bound on the optimum (minimization).
    pub best_bound: f64,
    pub relative_gap: f64,
    pub nodes_explored: u64,
    /// Simplex pivots spent across all node relaxations.
    pub pivots: u64,
    pub elapsed: Duration,
}

impl MilpResult {
    /// Strip the incumbent vector, keeping the reportable summary.
    pub fn summary(&self) -> SolverSummary {
        SolverSummary {
            status: self.status,
            incumbent_objective: self.incumbent_objective,
            best_bound: self.best_bound,
            relative_gap: self.relative_gap,
            nodes_explored: self.nodes_explored,
            pivots: self.pivots,
            elapsed_secs: self.elapsed.as_secs_f64(),
        }
    }
}

/// Serializable solve statistics carried by fit results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: MilpStatus,
    pub incumbent_objective: f64,
    pub best_bound: f64,
    pub relative_gap: f64,
    pub nodes_explored: u64,
    pub pivots: u64,
    pub elapsed_secs: f64,
}

/// Stopping rules and search parameters for [`solve_milp`].
///
/// `work_limit` caps the total simplex pivot count. Unlike `time_limit`
/// it is a deterministic budget: two runs with the same problem and
/// options stop at the same node and return identical results.
#[derive(Debug, Clone)]
pub struct MilpOptions {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<u64>,
    pub work_limit: Option<u64>,
    /// Relative optimality gap at which the search may stop; 0 proves
    /// optimality (up to a 1e-9 absolute slack).
    pub gap_tol: f64,
    /// A binary counts as integral when within this distance of 0 or 1.
    pub int_tol: f64,
    /// Feasible starting point used to seed the incumbent, if valid.
    pub initial_solution: Option<Vec<f64>>,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            time_limit: None,
            node_limit: None,
            work_limit: None,
            gap_tol: 0.0,
            int_tol: 1e-6,
            initial_solution: None,
        }
    }
}

impl MilpOptions {
    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = Some(limit);
        self
    }

    pub fn with_work_limit(mut self, pivots: u64) -> Self {
        self.work_limit = Some(pivots);
        self
    }

    pub fn with_node_limit(mut self, nodes: u64) -> Self {
        self.node_limit = Some(nodes);
        self
    }
}
