//! Bounded-variable two-phase revised primal simplex.
//!
//! The basis inverse is kept dense and rebuilt from scratch at a fixed
//! pivot cadence, which is plenty robust at the few-hundred-row scale
//! this crate targets. Variables live in one index space: structural
//! variables first, then one slack per row, then phase-one artificials.
//! Row senses become slack bounds: `<=` gives `[0, inf)`, `>=` gives
//! `(-inf, 0]`, `=` pins the slack at zero.
//!
//! Pricing is Dantzig (most negative reduced cost) with ties broken by
//! the lowest variable index, switching to Bland's rule after a run of
//! degenerate pivots so the method cannot cycle. All tie-breaking is by
//! index, so solves are bit-for-bit reproducible.

use super::{LpSolution, LpStatus, MilpProblem, Sense};
use crate::error::Error;
use crate::Result;

/// Reduced-cost threshold below which a variable is considered priced out.
const OPT_TOL: f64 = 1e-9;
/// Phase-one objective above this value means the LP is infeasible.
const PHASE1_TOL: f64 = 1e-8;
/// Entries smaller than this never serve as ratio-test pivots.
const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const STALL_LIMIT: u32 = 50;
/// Pivots between dense refactorizations of the basis inverse.
const REFACTOR_EVERY: u32 = 100;

/// Solve the LP relaxation of `problem` (integrality ignored).
pub fn solve_lp(problem: &MilpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let ctx = SimplexContext::new(problem);
    let core = ctx.solve(&problem.var_lower, &problem.var_upper)?;
    Ok(LpSolution {
        status: core.status,
        values: core.values,
        objective: core.objective,
        iterations: core.iterations,
    })
}

pub(super) struct LpCore {
    pub status: LpStatus,
    /// Structural variable values (empty unless `Optimal`).
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: u64,
}

/// Immutable column-wise view of a problem, shared across many solves
/// with different variable bounds (branch-and-bound nodes).
pub(super) struct SimplexContext {
    m: usize,
    n_struct: usize,
    /// Structural columns as `(row, coefficient)` lists.
    pub(super) cols: Vec<Vec<(usize, f64)>>,
    obj: Vec<f64>,
    obj_const: f64,
    rhs: Vec<f64>,
    slack_lower: Vec<f64>,
    slack_upper: Vec<f64>,
    max_iters: u64,
}

impl SimplexContext {
    pub(super) fn new(problem: &MilpProblem) -> Self {
        let n = problem.num_vars();
        let m = problem.constraints.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut rhs = Vec::with_capacity(m);
        let mut slack_lower = Vec::with_capacity(m);
        let mut slack_upper = Vec::with_capacity(m);
        for (r, c) in problem.constraints.iter().enumerate() {
            for &(j, v) in &c.coefs {
                if v != 0.0 {
                    cols[j].push((r, v));
                }
            }
            rhs.push(c.rhs);
            let (lo, hi) = match c.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            slack_lower.push(lo);
            slack_upper.push(hi);
        }
        Self {
            m,
            n_struct: n,
            cols,
            obj: problem.objective.clone(),
            obj_const: problem.objective_constant,
            rhs,
            slack_lower,
            slack_upper,
            max_iters: 50_000u64.max(200 * (n as u64 + m as u64)),
        }
    }

    /// Solve with the given structural bounds (slack bounds are fixed by
    /// the row senses).
    pub(super) fn solve(&self, lower: &[f64], upper: &[f64]) -> Result<LpCore> {
        debug_assert_eq!(lower.len(), self.n_struct);
        debug_assert_eq!(upper.len(), self.n_struct);
        let mut t = Tableau::new(self, lower, upper);
        if t.num_artif > 0 {
            match t.run_phase()? {
                PhaseEnd::Optimal => {}
                PhaseEnd::Unbounded => {
                    return Err(Error::SolverFailure(
                        "phase-one objective unbounded below zero".into(),
                    ));
                }
            }
            if t.phase1_objective() > PHASE1_TOL {
                return Ok(LpCore {
                    status: LpStatus::Infeasible,
                    values: Vec::new(),
                    objective: f64::INFINITY,
                    iterations: t.iterations,
                });
            }
            t.pivot_out_artificials()?;
            t.enter_phase2();
        } else {
            t.enter_phase2();
        }
        match t.run_phase()? {
            PhaseEnd::Optimal => {
                let values = t.x[..self.n_struct].to_vec();
                let objective = self.obj_const
                    + self
                        .obj
                        .iter()
                        .zip(&values)
                        .map(|(c, v)| c * v)
                        .sum::<f64>();
                Ok(LpCore {
                    status: LpStatus::Optimal,
                    values,
                    objective,
                    iterations: t.iterations,
                })
            }
            PhaseEnd::Unbounded => Ok(LpCore {
                status: LpStatus::Unbounded,
                values: Vec::new(),
                objective: f64::NEG_INFINITY,
                iterations: t.iterations,
            }),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum VarState {
    AtLower,
    AtUpper,
    Free,
    Basic,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Tableau<'a> {
    ctx: &'a SimplexContext,
    /// Bounds over structural + slack + artificial variables.
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    state: Vec<VarState>,
    x: Vec<f64>,
    /// basis[r] = variable basic in row r.
    basis: Vec<usize>,
    /// Dense row-major basis inverse, m x m.
    binv: Vec<f64>,
    artif_row: Vec<usize>,
    artif_sign: Vec<f64>,
    num_artif: usize,
    phase_one: bool,
    iterations: u64,
    since_refactor: u32,
    /// True right after a refactorization, before any pivot; an optimal
    /// claim is only accepted in this state.
    clean: bool,
    // scratch
    y: Vec<f64>,
    w: Vec<f64>,
    resid: Vec<f64>,
}

impl<'a> Tableau<'a> {
    fn new(ctx: &'a SimplexContext, struct_lower: &[f64], struct_upper: &[f64]) -> Self {
        let n = ctx.n_struct;
        let m = ctx.m;
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        lower.extend_from_slice(struct_lower);
        upper.extend_from_slice(struct_upper);
        lower.extend_from_slice(&ctx.slack_lower);
        upper.extend_from_slice(&ctx.slack_upper);

        let mut state = Vec::with_capacity(n + m);
        let mut x = Vec::with_capacity(n + m);
        for j in 0..n {
            if lower[j].is_finite() {
                state.push(VarState::AtLower);
                x.push(lower[j]);
            } else if upper[j].is_finite() {
                state.push(VarState::AtUpper);
                x.push(upper[j]);
            } else {
                state.push(VarState::Free);
                x.push(0.0);
            }
        }
        // Slack basis start.
        let mut basis = Vec::with_capacity(m);
        for r in 0..m {
            state.push(VarState::Basic);
            x.push(0.0);
            basis.push(n + r);
        }
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = 1.0;
        }
        // Slack values from structural activities; rows whose slack lands
        // outside its bounds get a basic artificial instead.
        let mut act = vec![0.0; m];
        for (j, col) in ctx.cols.iter().enumerate() {
            let v = x[j];
            if v != 0.0 {
                for &(r, a) in col {
                    act[r] += a * v;
                }
            }
        }
        let mut artif_row = Vec::new();
        let mut artif_sign = Vec::new();
        for r in 0..m {
            let free_val = ctx.rhs[r] - act[r];
            let s = n + r;
            if free_val < lower[s] - 1e-12 || free_val > upper[s] + 1e-12 {
                let clamped = free_val.clamp(lower[s], upper[s]);
                let resid = free_val - clamped;
                x[s] = clamped;
                state[s] = if clamped == upper[s] && upper[s].is_finite() {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                let k = artif_row.len();
                let sign = if resid >= 0.0 { 1.0 } else { -1.0 };
                artif_row.push(r);
                artif_sign.push(sign);
                basis[r] = n + m + k;
                // The starting basis column for this row is the artificial,
                // so B = diag(sign) there; diag(sign) is its own inverse.
                binv[r * m + r] = sign;
                lower.push(0.0);
                upper.push(f64::INFINITY);
                state.push(VarState::Basic);
                x.push(resid.abs());
            } else {
                x[s] = free_val;
            }
        }
        let num_artif = artif_row.len();
        let mut cost = vec![0.0; n + m + num_artif];
        for c in cost.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        Self {
            ctx,
            lower,
            upper,
            cost,
            state,
            x,
            basis,
            binv,
            artif_row,
            artif_sign,
            num_artif,
            phase_one: num_artif > 0,
            iterations: 0,
            since_refactor: 0,
            clean: true,
            y: vec![0.0; m],
            w: vec![0.0; m],
            resid: vec![0.0; m],
        }
    }

    fn num_vars(&self) -> usize {
        self.ctx.n_struct + self.ctx.m + self.num_artif
    }

    #[inline]
    fn visit_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        let n = self.ctx.n_struct;
        let m = self.ctx.m;
        if j < n {
            for &(r, v) in &self.ctx.cols[j] {
                f(r, v);
            }
        } else if j < n + m {
            f(j - n, 1.0);
        } else {
            let k = j - n - m;
            f(self.artif_row[k], self.artif_sign[k]);
        }
    }

    fn phase1_objective(&self) -> f64 {
        let base = self.ctx.n_struct + self.ctx.m;
        (0..self.num_artif).map(|k| self.x[base + k]).sum()
    }

    /// Switch artificials off and load the real objective.
    fn enter_phase2(&mut self) {
        let n = self.ctx.n_struct;
        let m = self.ctx.m;
        for c in self.cost.iter_mut() {
            *c = 0.0;
        }
        self.cost[..n].copy_from_slice(&self.ctx.obj);
        for k in 0..self.num_artif {
            self.lower[n + m + k] = 0.0;
            self.upper[n + m + k] = 0.0;
        }
        self.phase_one = false;
        // Force a verification refactor before any optimality claim.
        self.clean = false;
    }

    /// Replace basic artificials that sit at zero with some real column
    /// having a nonzero element in that row. Rows with no such column are
    /// redundant; their artificial stays basic, pinned at zero.
    fn pivot_out_artificials(&mut self) -> Result<()> {
        let n = self.ctx.n_struct;
        let m = self.ctx.m;
        for r in 0..m {
            if self.basis[r] < n + m {
                continue;
            }
            let mut chosen = None;
            for j in 0..n + m {
                if self.state[j] == VarState::Basic {
                    continue;
                }
                // (B^-1 A)[r][j] is a dot of binv row r with column j.
                let mut piv = 0.0;
                self.visit_col(j, |i, v| piv += self.binv[r * m + i] * v);
                if piv.abs() > 1e-7 {
                    chosen = Some(j);
                    break;
                }
            }
            if let Some(e) = chosen {
                self.ftran(e);
                let d = 1.0;
                self.apply_pivot(e, r, d, 0.0, false)?;
            }
        }
        Ok(())
    }

    /// w = B^-1 A_e into scratch.
    fn ftran(&mut self, e: usize) {
        let m = self.ctx.m;
        let n = self.ctx.n_struct;
        for v in self.w.iter_mut() {
            *v = 0.0;
        }
        if e < n {
            for &(i, v) in &self.ctx.cols[e] {
                for r in 0..m {
                    self.w[r] += self.binv[r * m + i] * v;
                }
            }
        } else if e < n + m {
            let i = e - n;
            for r in 0..m {
                self.w[r] += self.binv[r * m + i];
            }
        } else {
            let k = e - n - m;
            let i = self.artif_row[k];
            let v = self.artif_sign[k];
            for r in 0..m {
                self.w[r] += self.binv[r * m + i] * v;
            }
        }
    }

    /// y = (B^-1)^T c_B into scratch.
    fn btran(&mut self) {
        let m = self.ctx.m;
        for v in self.y.iter_mut() {
            *v = 0.0;
        }
        for r in 0..m {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yi, bi) in self.y.iter_mut().zip(row) {
                    *yi += cb * bi;
                }
            }
        }
    }

    /// Pick an entering variable; `None` means priced out.
    fn price(&mut self, bland: bool) -> Option<(usize, f64)> {
        self.btran();
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = OPT_TOL;
        for j in 0..self.num_vars() {
            if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let mut rc = self.cost[j];
            let y = &self.y;
            self.visit_col(j, |i, v| rc -= y[i] * v);
            let eligible = match self.state[j] {
                VarState::AtLower => rc < -OPT_TOL,
                VarState::AtUpper => rc > OPT_TOL,
                VarState::Free => rc.abs() > OPT_TOL,
                VarState::Basic => false,
            };
            if !eligible {
                continue;
            }
            if bland {
                return Some((j, rc));
            }
            if rc.abs() > best_score {
                best_score = rc.abs();
                best = Some((j, rc));
            }
        }
        best
    }

    fn run_phase(&mut self) -> Result<PhaseEnd> {
        let mut bland = false;
        let mut stall = 0u32;
        loop {
            if self.iterations >= self.ctx.max_iters {
                return Err(Error::SolverFailure(format!(
                    "simplex iteration limit {} reached",
                    self.ctx.max_iters
                )));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let Some((e, rc)) = self.price(bland) else {
                if self.clean {
                    return Ok(PhaseEnd::Optimal);
                }
                self.refactor()?;
                continue;
            };
            let d = match self.state[e] {
                VarState::AtLower => 1.0,
                VarState::AtUpper => -1.0,
                VarState::Free => {
                    if rc < 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                VarState::Basic => unreachable!(),
            };
            self.ftran(e);

            // Ratio test: the entering variable moves by t >= 0 in
            // direction d; basic variable r moves by -d*w[r]*t.
            let t_bound = if self.lower[e].is_finite() && self.upper[e].is_finite() {
                self.upper[e] - self.lower[e]
            } else {
                f64::INFINITY
            };
            let m = self.ctx.m;
            let mut t_rows = f64::INFINITY;
            for r in 0..m {
                let wr = self.w[r];
                if wr.abs() <= PIVOT_TOL {
                    continue;
                }
                let coeff = d * wr;
                let b = self.basis[r];
                let t_r = if coeff > 0.0 {
                    if self.lower[b] == f64::NEG_INFINITY {
                        continue;
                    }
                    ((self.x[b] - self.lower[b]) / coeff).max(0.0)
                } else {
                    if self.upper[b] == f64::INFINITY {
                        continue;
                    }
                    ((self.x[b] - self.upper[b]) / coeff).max(0.0)
                };
                if t_r < t_rows {
                    t_rows = t_r;
                }
            }

            if t_bound <= t_rows {
                if t_bound.is_infinite() {
                    return if self.phase_one {
                        Err(Error::SolverFailure(
                            "phase-one relaxation reported unbounded".into(),
                        ))
                    } else {
                        Ok(PhaseEnd::Unbounded)
                    };
                }
                // Bound flip: no basis change.
                self.x[e] += d * t_bound;
                for r in 0..m {
                    let wr = self.w[r];
                    if wr != 0.0 {
                        self.x[self.basis[r]] -= d * t_bound * wr;
                    }
                }
                self.state[e] = match self.state[e] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    s => s,
                };
                self.x[e] = if self.state[e] == VarState::AtUpper {
                    self.upper[e]
                } else {
                    self.lower[e]
                };
                self.iterations += 1;
                if t_bound <= 1e-10 {
                    stall += 1;
                } else {
                    stall = 0;
                    bland = false;
                }
                if stall >= STALL_LIMIT {
                    bland = true;
                }
                continue;
            }

            // Blocking row: smallest ratio; among near-ties prefer the
            // largest pivot (Dantzig) or the smallest basic variable
            // index (Bland).
            let tie = t_rows + 1e-10 * (1.0 + t_rows.abs());
            let mut r_leave = usize::MAX;
            let mut best_piv = 0.0_f64;
            let mut best_idx = usize::MAX;
            let mut leave_upper = false;
            for r in 0..m {
                let wr = self.w[r];
                if wr.abs() <= PIVOT_TOL {
                    continue;
                }
                let coeff = d * wr;
                let b = self.basis[r];
                let (t_r, to_upper) = if coeff > 0.0 {
                    if self.lower[b] == f64::NEG_INFINITY {
                        continue;
                    }
                    (((self.x[b] - self.lower[b]) / coeff).max(0.0), false)
                } else {
                    if self.upper[b] == f64::INFINITY {
                        continue;
                    }
                    (((self.x[b] - self.upper[b]) / coeff).max(0.0), true)
                };
                if t_r > tie {
                    continue;
                }
                let better = if bland {
                    b < best_idx
                } else {
                    wr.abs() > best_piv || (wr.abs() == best_piv && b < best_idx)
                };
                if better {
                    r_leave = r;
                    best_piv = wr.abs();
                    best_idx = b;
                    leave_upper = to_upper;
                }
            }
            if r_leave == usize::MAX {
                // Every candidate drifted above the tie window; refactor
                // and retry rather than pivot on noise.
                if !self.clean {
                    self.refactor()?;
                    continue;
                }
                return Err(Error::SolverFailure("ratio test found no pivot".into()));
            }
            if best_piv < 1e-7 && !self.clean {
                self.refactor()?;
                continue;
            }
            let t = t_rows.max(0.0);
            self.apply_pivot(e, r_leave, d, t, leave_upper)?;
            self.iterations += 1;
            if t <= 1e-10 {
                stall += 1;
            } else {
                stall = 0;
                bland = false;
            }
            if stall >= STALL_LIMIT {
                bland = true;
            }
        }
    }

    /// Move entering variable e by d*t, put it in the basis at row
    /// `r_leave`, and send the leaving variable to one of its bounds.
    /// Assumes `self.w` holds B^-1 A_e.
    fn apply_pivot(
        &mut self,
        e: usize,
        r_leave: usize,
        d: f64,
        t: f64,
        leave_upper: bool,
    ) -> Result<()> {
        let m = self.ctx.m;
        let pivot = self.w[r_leave];
        if pivot.abs() <= PIVOT_TOL {
            return Err(Error::SolverFailure("degenerate pivot element".into()));
        }
        if t > 0.0 {
            self.x[e] += d * t;
            for r in 0..m {
                let wr = self.w[r];
                if wr != 0.0 {
                    self.x[self.basis[r]] -= d * t * wr;
                }
            }
        }
        let leaving = self.basis[r_leave];
        self.x[leaving] = if leave_upper {
            self.upper[leaving]
        } else {
            self.lower[leaving]
        };
        self.state[leaving] = if leave_upper {
            VarState::AtUpper
        } else {
            VarState::AtLower
        };
        self.state[e] = VarState::Basic;
        self.basis[r_leave] = e;

        // binv <- E binv with the eta column built from w.
        let inv_p = 1.0 / pivot;
        let (head, rest) = self.binv.split_at_mut(r_leave * m);
        let (prow, tail) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v *= inv_p;
        }
        for (r, row) in head.chunks_exact_mut(m).enumerate() {
            let f = self.w[r];
            if f != 0.0 {
                for (rv, pv) in row.iter_mut().zip(prow.iter()) {
                    *rv -= f * pv;
                }
            }
        }
        for (k, row) in tail.chunks_exact_mut(m).enumerate() {
            let f = self.w[r_leave + 1 + k];
            if f != 0.0 {
                for (rv, pv) in row.iter_mut().zip(prow.iter()) {
                    *rv -= f * pv;
                }
            }
        }
        self.since_refactor += 1;
        self.clean = false;
        Ok(())
    }

    /// Rebuild the dense basis inverse by Gauss-Jordan with partial
    /// pivoting, then recompute basic values from the bound values of
    /// the nonbasic variables.
    fn refactor(&mut self) -> Result<()> {
        let m = self.ctx.m;
        if m > 0 {
            let mut aug = vec![0.0; m * 2 * m];
            let width = 2 * m;
            for (c, &bj) in self.basis.iter().enumerate() {
                self.visit_col(bj, |r, v| aug[r * width + c] = v);
            }
            for r in 0..m {
                aug[r * width + m + r] = 1.0;
            }
            for k in 0..m {
                let mut piv_r = k;
                let mut piv_v = aug[k * width + k].abs();
                for r in k + 1..m {
                    let v = aug[r * width + k].abs();
                    if v > piv_v {
                        piv_v = v;
                        piv_r = r;
                    }
                }
                if piv_v < 1e-11 {
                    return Err(Error::Factorization(format!(
                        "singular basis at column {k}"
                    )));
                }
                if piv_r != k {
                    for c in 0..width {
                        aug.swap(k * width + c, piv_r * width + c);
                    }
                }
                let inv = 1.0 / aug[k * width + k];
                for c in 0..width {
                    aug[k * width + c] *= inv;
                }
                for r in 0..m {
                    if r == k {
                        continue;
                    }
                    let f = aug[r * width + k];
                    if f != 0.0 {
                        for c in 0..width {
                            aug[r * width + c] -= f * aug[k * width + c];
                        }
                    }
                }
            }
            for r in 0..m {
                for c in 0..m {
                    self.binv[r * m + c] = aug[r * width + m + c];
                }
            }
            // x_B = B^-1 (b - A_N x_N)
            let n = self.ctx.n_struct;
            for r in 0..m {
                self.resid[r] = self.ctx.rhs[r];
            }
            for j in 0..self.num_vars() {
                if self.state[j] == VarState::Basic {
                    continue;
                }
                let v = self.x[j];
                if v == 0.0 {
                    continue;
                }
                if j < n {
                    for &(r, a) in &self.ctx.cols[j] {
                        self.resid[r] -= a * v;
                    }
                } else if j < n + m {
                    self.resid[j - n] -= v;
                } else {
                    let k = j - n - m;
                    self.resid[self.artif_row[k]] -= self.artif_sign[k] * v;
                }
            }
            for r in 0..m {
                let mut s = 0.0;
                for i in 0..m {
                    s += self.binv[r * m + i] * self.resid[i];
                }
                self.x[self.basis[r]] = s;
            }
        }
        self.since_refactor = 0;
        self.clean = true;
        Ok(())
    }
}
