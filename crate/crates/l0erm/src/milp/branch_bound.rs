//! Branch-and-bound over the binary variables.
//!
//! The search dives depth-first (toward the rounded LP value) until a
//! first incumbent exists, then switches to best-bound order. Node
//! selection, branching variable choice, and every tie-break are by
//! index, so a solve is a pure function of the problem and options:
//! reruns give identical incumbents, bounds, and node counts. Wall-clock
//! limits are the one exception, which is why reproducible runs should
//! cap work via `work_limit` (total simplex pivots) instead.
//!
//! At every node with a fractional relaxation a rounding pass walks the
//! binaries in index order, snapping each to the cheapest value that
//! keeps all rows satisfiable given the values chosen so far. The result
//! only becomes the incumbent after a full feasibility check, so the
//! pass is free to fail on hard instances; on on-off structures it
//! usually lands a good integer point long before the tree proves it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::simplex::SimplexContext;
use super::{LpStatus, MilpOptions, MilpProblem, MilpResult, MilpStatus};
use crate::error::Error;
use crate::Result;

/// Row slack allowed when the rounding pass decides a single binary.
const DECIDE_TOL: f64 = 1e-9;
/// Constraint violation allowed in an incumbent.
const INCUMBENT_TOL: f64 = 1e-6;
/// A child is only queued if its bound beats the incumbent by this much.
const IMPROVE_EPS: f64 = 1e-12;
/// Absolute gap at which optimality is declared even with `gap_tol = 0`.
const PROOF_EPS: f64 = 1e-10;

#[derive(Clone)]
struct Node {
    /// Bit k set: binary ordinal k fixed to zero (resp. one).
    fixed_zero: Vec<u64>,
    fixed_one: Vec<u64>,
    /// Parent relaxation objective; a valid bound for the subtree.
    bound: f64,
    seq: u64,
}

/// Heap wrapper: pops the smallest bound, then the smallest sequence
/// number, so exploration order is total and deterministic.
struct Open(Node);

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.0.seq == other.0.seq
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

#[inline]
fn set_bit(mask: &mut [u64], k: usize) {
    mask[k / 64] |= 1 << (k % 64);
}

#[inline]
fn get_bit(mask: &[u64], k: usize) -> bool {
    mask[k / 64] >> (k % 64) & 1 == 1
}

/// Minimize `problem` exactly over its binary variables.
pub fn solve_milp(problem: &MilpProblem, options: &MilpOptions) -> Result<MilpResult> {
    problem.validate()?;
    if !(options.gap_tol.is_finite() && options.gap_tol >= 0.0) {
        return Err(Error::InvalidArgument("gap_tol must be finite and >= 0".into()));
    }
    if !(options.int_tol > 0.0 && options.int_tol < 0.5) {
        return Err(Error::InvalidArgument("int_tol must lie in (0, 0.5)".into()));
    }
    let start = Instant::now();
    let n = problem.num_vars();
    let binary_vars: Vec<usize> = (0..n).filter(|&j| problem.is_binary[j]).collect();
    let words = binary_vars.len().div_ceil(64).max(1);
    let ctx = SimplexContext::new(problem);

    let mut incumbent: Option<Vec<f64>> = None;
    let mut inc_obj = f64::INFINITY;
    if let Some(x0) = &options.initial_solution {
        match sanitize_start(problem, x0, options.int_tol) {
            Some((x, obj)) => {
                incumbent = Some(x);
                inc_obj = obj;
            }
            None => log::warn!("initial solution rejected: not feasible and integral"),
        }
    }

    let mut stack: Vec<Node> = vec![Node {
        fixed_zero: vec![0; words],
        fixed_one: vec![0; words],
        bound: f64::NEG_INFINITY,
        seq: 0,
    }];
    let mut heap: BinaryHeap<Open> = BinaryHeap::new();
    let mut seq: u64 = 0;
    let mut nodes: u64 = 0;
    let mut pivots: u64 = 0;
    let mut unbounded = false;
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];

    let limit_hit = loop {
        let node = if incumbent.is_none() {
            stack.pop()
        } else {
            if !stack.is_empty() {
                for nd in stack.drain(..) {
                    heap.push(Open(nd));
                }
            }
            heap.pop().map(|o| o.0)
        };
        let Some(node) = node else {
            break false;
        };

        let hit_time = options
            .time_limit
            .is_some_and(|tl| start.elapsed() >= tl);
        let hit_nodes = options.node_limit.is_some_and(|nl| nodes >= nl);
        let hit_work = options.work_limit.is_some_and(|wl| pivots >= wl);
        if hit_time || hit_nodes || hit_work {
            stack.push(node);
            break true;
        }

        if incumbent.is_some() {
            let slack = PROOF_EPS.max(options.gap_tol * inc_obj.abs().max(1.0));
            if node.bound >= inc_obj - slack {
                // Best remaining bound is within tolerance: proved.
                stack.push(node);
                break false;
            }
        }

        if !apply_fixings(problem, &binary_vars, &node, &mut lo, &mut hi) {
            continue;
        }
        nodes += 1;
        let lp = ctx.solve(&lo, &hi)?;
        pivots += lp.iterations;
        match lp.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                // Any node's ray is a ray of the full relaxation.
                unbounded = true;
                break false;
            }
            LpStatus::Optimal => {}
        }
        let obj = lp.objective;
        if incumbent.is_some() && obj >= inc_obj - IMPROVE_EPS {
            continue;
        }

        // Most fractional binary; ties go to the lowest variable index.
        let mut branch_k = usize::MAX;
        let mut worst = -1.0;
        for (k, &j) in binary_vars.iter().enumerate() {
            let v = lp.values[j];
            let f = (v - v.round()).abs();
            if f > options.int_tol && f > worst + 1e-12 {
                worst = f;
                branch_k = k;
            }
        }

        if branch_k == usize::MAX {
            // Integer feasible; LP values already satisfy every row.
            incumbent = Some(lp.values.clone());
            inc_obj = obj;
            continue;
        }

        if let Some((hx, hobj)) = greedy_rounding(problem, &binary_vars, &ctx.cols, &lp.values) {
            if hobj < inc_obj - IMPROVE_EPS {
                incumbent = Some(hx);
                inc_obj = hobj;
            }
        }
        if incumbent.is_some() && obj >= inc_obj - IMPROVE_EPS {
            continue;
        }

        let j = binary_vars[branch_k];
        let prefer_one = lp.values[j] >= 0.5;
        let child = |fix_one: bool, seq: u64| {
            let mut nd = Node {
                fixed_zero: node.fixed_zero.clone(),
                fixed_one: node.fixed_one.clone(),
                bound: obj,
                seq,
            };
            if fix_one {
                set_bit(&mut nd.fixed_one, branch_k);
            } else {
                set_bit(&mut nd.fixed_zero, branch_k);
            }
            nd
        };
        if incumbent.is_none() {
            // Dive toward the LP value: preferred child pops first.
            stack.push(child(!prefer_one, seq + 1));
            stack.push(child(prefer_one, seq + 2));
        } else {
            heap.push(Open(child(false, seq + 1)));
            heap.push(Open(child(true, seq + 2)));
        }
        seq += 2;
    };

    let elapsed = start.elapsed();
    let mut open_bound = f64::INFINITY;
    for nd in &stack {
        open_bound = open_bound.min(nd.bound);
    }
    if let Some(top) = heap.peek() {
        open_bound = open_bound.min(top.0.bound);
    }

    let (status, best_bound) = if unbounded {
        (MilpStatus::Unbounded, f64::NEG_INFINITY)
    } else if limit_hit {
        (MilpStatus::FeasibleLimitHit, open_bound.min(inc_obj))
    } else if incumbent.is_some() {
        (MilpStatus::Optimal, open_bound.min(inc_obj))
    } else {
        (MilpStatus::Infeasible, f64::INFINITY)
    };
    let relative_gap = if incumbent.is_some() && best_bound.is_finite() {
        (inc_obj - best_bound).max(0.0) / inc_obj.abs().max(1e-10)
    } else if status == MilpStatus::Infeasible {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(MilpResult {
        status,
        incumbent,
        incumbent_objective: inc_obj,
        best_bound,
        relative_gap,
        nodes_explored: nodes,
        pivots,
        elapsed,
    })
}

/// Write node bounds into `lo`/`hi`; false if a fixing contradicts the
/// variable's own bounds (the node is trivially infeasible).
fn apply_fixings(
    problem: &MilpProblem,
    binary_vars: &[usize],
    node: &Node,
    lo: &mut [f64],
    hi: &mut [f64],
) -> bool {
    lo.copy_from_slice(&problem.var_lower);
    hi.copy_from_slice(&problem.var_upper);
    for (k, &j) in binary_vars.iter().enumerate() {
        let fix = if get_bit(&node.fixed_zero, k) {
            0.0
        } else if get_bit(&node.fixed_one, k) {
            1.0
        } else {
            continue;
        };
        if fix < lo[j] - 1e-12 || fix > hi[j] + 1e-12 {
            return false;
        }
        lo[j] = fix;
        hi[j] = fix;
    }
    true
}

/// Validate a user-supplied starting point: right length, finite,
/// binaries integral (then snapped exactly), and feasible.
fn sanitize_start(problem: &MilpProblem, x0: &[f64], int_tol: f64) -> Option<(Vec<f64>, f64)> {
    if x0.len() != problem.num_vars() || x0.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut x = x0.to_vec();
    for (j, v) in x.iter_mut().enumerate() {
        if problem.is_binary[j] {
            let r = v.round();
            if (*v - r).abs() > int_tol || !(r == 0.0 || r == 1.0) {
                return None;
            }
            *v = r;
        }
    }
    if problem.max_violation(&x) > INCUMBENT_TOL {
        return None;
    }
    let obj = problem.objective_value(&x);
    Some((x, obj))
}

/// Round the binaries of an LP point to a feasible integer point, in
/// index order, choosing the cheaper value whenever both keep every row
/// within `DECIDE_TOL` given the values fixed so far. Returns the point
/// and its objective after an exact feasibility check, or nothing.
fn greedy_rounding(
    problem: &MilpProblem,
    binary_vars: &[usize],
    cols: &[Vec<(usize, f64)>],
    lp_values: &[f64],
) -> Option<(Vec<f64>, f64)> {
    let m = problem.constraints.len();
    let mut x = lp_values.to_vec();
    let mut act = vec![0.0; m];
    for (r, a) in act.iter_mut().enumerate() {
        *a = problem.activity(r, &x);
    }
    for &j in binary_vars {
        let (blo, bhi) = (problem.var_lower[j], problem.var_upper[j]);
        let mut feas0 = blo <= 0.0 && bhi >= 0.0;
        let mut feas1 = blo <= 1.0 && bhi >= 1.0;
        for &(r, a) in &cols[j] {
            if !feas0 && !feas1 {
                break;
            }
            let rest = act[r] - a * x[j];
            let c = &problem.constraints[r];
            let ok = |v: f64| match c.sense {
                super::Sense::Le => rest + a * v <= c.rhs + DECIDE_TOL,
                super::Sense::Ge => rest + a * v >= c.rhs - DECIDE_TOL,
                super::Sense::Eq => (rest + a * v - c.rhs).abs() <= DECIDE_TOL,
            };
            feas0 = feas0 && ok(0.0);
            feas1 = feas1 && ok(1.0);
        }
        let v = match (feas0, feas1) {
            (true, true) => {
                if problem.objective[j] < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            (true, false) => 0.0,
            (false, true) => 1.0,
            (false, false) => return None,
        };
        if v != x[j] {
            for &(r, a) in &cols[j] {
                act[r] += a * (v - x[j]);
            }
            x[j] = v;
        }
    }
    if problem.max_violation(&x) > INCUMBENT_TOL {
        return None;
    }
    let obj = problem.objective_value(&x);
    Some((x, obj))
}
