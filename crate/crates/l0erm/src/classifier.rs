//! Linear threshold classifiers and 0-1 loss evaluation.
//!
//! A classifier predicts `1{x1 + xt' theta >= 0}`: the coefficient on `x1`
//! is pinned to one, which normalizes the scale of the rule. Ties at a
//! score of exactly zero classify as 1.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Error;
use crate::Result;

/// Coefficient vector of a linear threshold rule (the `x1` coefficient is
/// implicitly 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub theta: Vec<f64>,
}

impl LinearClassifier {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "classifier coefficients must be finite".into(),
            ));
        }
        Ok(Self { theta })
    }
}

/// A compact box of feasible coefficient vectors, one interval per
/// selectable feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParameterBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidArgument("box bound lengths differ".into()));
        }
        for (j, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "box bound {j} not finite"
                )));
            }
            if l > u {
                return Err(Error::InvalidArgument(format!(
                    "box bound {j} has lower {l} > upper {u}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The symmetric box `[-half_width, half_width]^p`.
    pub fn symmetric(p: usize, half_width: f64) -> Self {
        Self {
            lower: vec![-half_width; p],
            upper: vec![half_width; p],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, theta: &[f64], tol: f64) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&t, (&l, &u))| t >= l - tol && t <= u + tol)
    }
}

/// Linear score `x1 + xt_row' theta`. Lengths must already match.
#[inline]
pub fn score(theta: &[f64], x1: f64, xt_row: &[f64]) -> f64 {
    debug_assert_eq!(theta.len(), xt_row.len());
    let mut s = x1;
    for (t, x) in theta.iter().zip(xt_row) {
        s += t * x;
    }
    s
}

/// Classify one observation: 1 iff `x1 + xt_row' theta >= 0`.
pub fn predict(theta: &[f64], x1: f64, xt_row: &[f64]) -> Result<u8> {
    if theta.len() != xt_row.len() {
        return Err(Error::InvalidArgument(format!(
            "theta has {} coefficients but the row has {} features",
            theta.len(),
            xt_row.len()
        )));
    }
    if !x1.is_finite() || !xt_row.iter().all(|v| v.is_finite()) || !theta.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite predict input".into()));
    }
    Ok(u8::from(score(theta, x1, xt_row) >= 0.0))
}

/// Fraction of observations misclassified by `theta`; always a multiple
/// of `1/n`.
pub fn empirical_risk(dataset: &Dataset, theta: &[f64]) -> Result<f64> {
    if theta.len() != dataset.p() {
        return Err(Error::InvalidArgument(format!(
            "theta has {} coefficients but the dataset has p={}",
            theta.len(),
            dataset.p()
        )));
    }
    let mut errors = 0usize;
    for i in 0..dataset.n() {
        let pred = u8::from(score(theta, dataset.x1()[i], dataset.xt_row(i)) >= 0.0);
        errors += usize::from(pred != dataset.labels()[i]);
    }
    Ok(errors as f64 / dataset.n() as f64)
}

/// Number of coefficients strictly larger than `tol` in magnitude.
pub fn l0_norm(theta: &[f64], tol: f64) -> usize {
    debug_assert!(tol >= 0.0);
    theta.iter().filter(|v| v.abs() > tol).count()
}

/// Indices of the coefficients counted by [`l0_norm`].
pub fn support(theta: &[f64], tol: f64) -> Vec<usize> {
    theta
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > tol)
        .map(|(j, _)| j)
        .collect()
}
