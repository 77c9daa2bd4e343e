//! Penalty-level selection.
//!
//! Two closed-form rules map the sample size `n` and the selectable
//! feature count `p` to a penalty level `lambda`:
//!
//! * a rate rule `lambda = c * sqrt(ln(p v n) / n)` with a user constant
//!   `c > 0`, and
//! * a plug-in heuristic `lambda = v * ln(ln(p v n)) * sqrt(ln(p v n) / n)`
//!   whose multiplier `v = h(1 - h)` is the binomial variance of the
//!   empirical risk at the best intercept-only fit `h`.
//!
//! Both are deterministic pure functions. An optional grid cross
//! validation ([`calibrate_v`]) picks the multiplier from data instead;
//! the closed-form heuristic is the default everywhere else.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::classifier::{predict, ParameterBox};
use crate::data::{complement_rows, kfold_stratified, Dataset};
use crate::erm;
use crate::milp::MilpOptions;
use crate::{Error, Result};

/// Rate rule `lambda = c * sqrt(ln(p v n) / n)`.
///
/// Degenerate `p = n = 1` yields `lambda = 0` (logged as a warning)
/// because `ln(1) = 0`.
pub fn lambda_condition2(c: f64, n: usize, p: usize) -> Result<f64> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "rate constant must be a positive real, got {c}"
        )));
    }
    check_sizes(n, p)?;
    let lambda = c * rate_factor(n, p);
    if lambda <= 0.0 {
        log::warn!("degenerate penalty lambda = {lambda} at n = {n}, p = {p}");
    }
    Ok(lambda)
}

/// Plug-in heuristic `lambda = v * ln(ln(p v n)) * sqrt(ln(p v n) / n)`.
///
/// Requires `p v n >= 3` so the iterated logarithm is positive; `v = 0`
/// yields `lambda = 0` (logged as a warning).
pub fn lambda_heuristic(n: usize, p: usize, v: f64) -> Result<f64> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "heuristic multiplier must be a nonnegative real, got {v}"
        )));
    }
    check_sizes(n, p)?;
    let m = p.max(n);
    if m < 3 {
        return Err(Error::InvalidArgument(format!(
            "ln(ln(p v n)) needs p v n >= 3, got {m}"
        )));
    }
    let lambda = v * (m as f64).ln().ln() * rate_factor(n, p);
    if lambda <= 0.0 {
        log::warn!("nonpositive penalty lambda = {lambda} from multiplier v = {v}");
    }
    Ok(lambda)
}

/// Plug-in multiplier `v = h(1 - h)` where `h` is the lowest empirical
/// risk among intercept-only classifiers `1{x1 + t >= 0}`. Always lies in
/// `[0, 0.25]`.
pub fn heuristic_v(dataset: &Dataset) -> Result<f64> {
    // Jumps of the intercept-only risk sit at t = -x1_i; one candidate
    // below them all covers the remaining constant piece.
    let lo = dataset.x1().iter().fold(f64::INFINITY, |a, &v| a.min(-v)) - 1.0;
    let hi = dataset.x1().iter().fold(f64::NEG_INFINITY, |a, &v| a.max(-v)) + 1.0;
    let (_, h) = erm::fit_intercept_only(dataset, lo, hi)?;
    Ok(h * (1.0 - h))
}

/// Grid cross-validation of the heuristic multiplier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationSpec {
    /// Candidate multipliers; each must be finite and nonnegative.
    pub grid: Vec<f64>,
    /// Fold count, in `2..=n`.
    pub folds: usize,
    /// Seed for the stratified fold shuffle.
    pub seed: u64,
}

/// Outcome of [`calibrate_v`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Selected multiplier; risk ties go to the largest (sparsest) one.
    pub v: f64,
    /// Heuristic penalty at the selected multiplier and the full sample
    /// size.
    pub lambda: f64,
    /// Pooled held-out misclassification risk per grid entry.
    pub cv_risk: Vec<f64>,
}

/// Pick the heuristic multiplier by stratified k-fold cross validation:
/// each candidate `v` is turned into a penalty from the fold's training
/// size, fitted there, and scored by pooled held-out misclassifications.
/// Ties prefer the larger multiplier.
pub fn calibrate_v(
    dataset: &Dataset,
    pbox: &ParameterBox,
    spec: &CalibrationSpec,
    options: &MilpOptions,
) -> Result<CalibrationResult> {
    if spec.grid.is_empty() {
        return Err(Error::InvalidArgument("empty calibration grid".into()));
    }
    if let Some(bad) = spec.grid.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "calibration grid entry {bad} is not a nonnegative real"
        )));
    }
    let n = dataset.n();
    let splits: Vec<(Dataset, Dataset)> = kfold_stratified(dataset.labels(), spec.folds, spec.seed)?
        .iter()
        .map(|held| {
            let train = dataset.subset(&complement_rows(n, held))?;
            Ok((train, dataset.subset(held)?))
        })
        .collect::<Result<_>>()?;

    let mut cv_risk = Vec::with_capacity(spec.grid.len());
    let mut best: Option<(u64, f64)> = None;
    for &v in &spec.grid {
        #[cfg(feature = "parallel")]
        let per_fold: Result<Vec<u64>> = splits
            .par_iter()
            .map(|(train, held)| held_out_errors(train, held, v, pbox, options))
            .collect();
        #[cfg(not(feature = "parallel"))]
        let per_fold: Result<Vec<u64>> = splits
            .iter()
            .map(|(train, held)| held_out_errors(train, held, v, pbox, options))
            .collect();
        let errors: u64 = per_fold?.iter().sum();
        cv_risk.push(errors as f64 / n as f64);
        let better = match best {
            None => true,
            Some((be, bv)) => errors < be || (errors == be && v > bv),
        };
        if better {
            best = Some((errors, v));
        }
    }
    let (_, v) = best.expect("nonempty grid");
    Ok(CalibrationResult {
        v,
        lambda: lambda_heuristic(n, dataset.p(), v)?,
        cv_risk,
    })
}

fn held_out_errors(
    train: &Dataset,
    held: &Dataset,
    v: f64,
    pbox: &ParameterBox,
    options: &MilpOptions,
) -> Result<u64> {
    let lambda = lambda_heuristic(train.n(), train.p(), v)?;
    let fit = erm::fit_penalized(train, lambda, pbox, options)?;
    let mut errors = 0;
    for i in 0..held.n() {
        if predict(&fit.theta, held.x1()[i], held.xt_row(i))? != held.labels()[i] {
            errors += 1;
        }
    }
    Ok(errors)
}

fn rate_factor(n: usize, p: usize) -> f64 {
    ((p.max(n) as f64).ln() / n as f64).sqrt()
}

fn check_sizes(n: usize, p: usize) -> Result<()> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidArgument(format!(
            "sample size and feature count must be >= 1, got n = {n}, p = {p}"
        )));
    }
    Ok(())
}
