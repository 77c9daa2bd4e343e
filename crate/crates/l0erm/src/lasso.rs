//! Logit-lasso baseline: l1-penalized logistic regression.
//!
//! The model is `P(Y = 1 | X) = logistic(a + b1*x1 + xt' b)` where the
//! intercept `a` and the `x1` coefficient `b1` are never penalized; the
//! constant column of `xt` (when present) is absorbed into `a` and the
//! remaining columns carry an l1 penalty. Penalized features are
//! standardized to zero mean and unit variance internally and the
//! coefficients are reported back on the original scale.
//!
//! Each penalty level is solved by iteratively reweighted least squares
//! with cyclic coordinate descent and soft-thresholding on the local
//! quadratic, warm-started along a descending 100-point log grid from
//! `lambda_max` (the smallest penalty with an all-zero penalized block,
//! computed after profiling out the unpenalized terms). A step-halving
//! safeguard keeps the penalized negative log-likelihood nonincreasing.
//!
//! Model selection is seeded k-fold cross validation on the plug-in
//! misclassification risk, reporting both the risk minimizer
//! (`lambda_opt`, ties to the larger penalty) and the one-standard-error
//! choice (`lambda_1se`).

use serde::{Deserialize, Serialize};

use crate::classifier::LinearClassifier;
use crate::data::{complement_rows, kfold, kfold_stratified, Dataset};
use crate::{Error, Result};

/// Conditional probabilities are clipped this far from {0, 1} when
/// forming IRLS weights, so weights stay positive and the quadratic
/// model's gradient matches the true gradient to the same accuracy.
const MU_CLIP: f64 = 1e-7;
/// Outer (IRLS) iteration cap per penalty level.
const MAX_OUTER: usize = 100;
/// Inner coordinate-descent sweep cap per outer iteration.
const MAX_SWEEPS: usize = 2000;
/// Outer convergence: largest coefficient move over one IRLS step.
const OUTER_TOL: f64 = 1e-9;
/// Inner convergence: largest coefficient move over one sweep.
const SWEEP_TOL: f64 = 1e-11;
/// `|b1|` below this makes the scale normalization degenerate.
const DEGENERATE_BETA1: f64 = 1e-12;

/// Coefficients at one penalty level, on the original feature scale.
/// `beta` spans all `xt` columns with the constant column pinned to zero
/// (its effect lives in `intercept`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub lambda: f64,
    pub intercept: f64,
    pub beta1: f64,
    pub beta: Vec<f64>,
    pub converged: bool,
}

impl PathEntry {
    /// Linear index `a + b1*x1 + xt' b` of one observation.
    pub fn linear_index(&self, x1: f64, xt_row: &[f64]) -> f64 {
        let mut lin = self.intercept + self.beta1 * x1;
        for (b, x) in self.beta.iter().zip(xt_row) {
            lin += b * x;
        }
        lin
    }

    /// Plug-in label `1{linear index >= 0}`.
    pub fn predict(&self, x1: f64, xt_row: &[f64]) -> u8 {
        u8::from(self.linear_index(x1, xt_row) >= 0.0)
    }
}

/// A fitted regularization path, strictly decreasing in `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoPath {
    pub entries: Vec<PathEntry>,
    /// Constant `xt` column absorbed into the intercept, with its value.
    pub constant: Option<(usize, f64)>,
}

/// Cross-validation summary over a path grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Full-data path fitted on the same grid.
    pub path: LassoPath,
    pub mean_risk: Vec<f64>,
    /// Standard error of the fold risks at each penalty (sd / sqrt(k)).
    pub se_risk: Vec<f64>,
    pub lambda_opt: f64,
    pub lambda_1se: f64,
    pub opt_index: usize,
    pub one_se_index: usize,
    /// Folds whose training side carried a single class.
    pub single_class_folds: usize,
}

/// Cross-validation controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvSpec {
    pub folds: usize,
    pub seed: u64,
    /// Stratify the fold shuffle by label; plain shuffling by default.
    pub stratified: bool,
    pub grid_size: usize,
    /// Grid floor as a fraction of `lambda_max`; `None` picks the
    /// dimension rule of [`default_lambda_min_ratio`].
    pub lambda_min_ratio: Option<f64>,
}

impl Default for CvSpec {
    fn default() -> Self {
        Self {
            folds: 10,
            seed: 0,
            stratified: false,
            grid_size: 100,
            lambda_min_ratio: None,
        }
    }
}

/// Grid floor ratio: 0.01 in the wide regime `p > n`, else 1e-4.
pub fn default_lambda_min_ratio(n: usize, p: usize) -> f64 {
    if p > n {
        1e-2
    } else {
        1e-4
    }
}

/// Fit the full regularization path on `grid_size` log-spaced penalties
/// from `lambda_max` down to `lambda_max * lambda_min_ratio`.
pub fn fit_logit_lasso_path(
    dataset: &Dataset,
    grid_size: usize,
    lambda_min_ratio: f64,
) -> Result<LassoPath> {
    if grid_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "path needs at least 2 grid points, got {grid_size}"
        )));
    }
    if !(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "grid floor ratio must lie in (0, 1), got {lambda_min_ratio}"
        )));
    }
    let mut ws = Workspace::new(dataset)?;
    let (lambda_max, null_converged) = ws.profiled_lambda_max()?;
    let lambdas: Vec<f64> = (0..grid_size)
        .map(|k| lambda_max * lambda_min_ratio.powf(k as f64 / (grid_size - 1) as f64))
        .collect();
    // The null profile fit is the exact solution at lambda_max (every
    // penalized score is within the penalty), so the first grid point
    // needs no solve and its penalized block is exactly zero.
    ws.run_path_from(&lambdas, Some(null_converged))
}

/// Fit a path on a caller-fixed penalty grid (used per CV fold so every
/// fold scores the same penalties).
pub fn fit_path_on_grid(dataset: &Dataset, lambdas: &[f64]) -> Result<LassoPath> {
    Workspace::new(dataset)?.run_path(lambdas)
}

/// Seeded k-fold cross validation on plug-in misclassification risk.
pub fn cross_validate(dataset: &Dataset, spec: &CvSpec) -> Result<CvResult> {
    let n = dataset.n();
    let ratio = spec
        .lambda_min_ratio
        .unwrap_or_else(|| default_lambda_min_ratio(n, dataset.p()));
    let path = fit_logit_lasso_path(dataset, spec.grid_size, ratio)?;
    let lambdas: Vec<f64> = path.entries.iter().map(|e| e.lambda).collect();

    let held_sets = if spec.stratified {
        kfold_stratified(dataset.labels(), spec.folds, spec.seed)?
    } else {
        kfold(n, spec.folds, spec.seed)?
    };
    let mut single_class_folds = 0;
    let mut fold_risks: Vec<Vec<f64>> = Vec::with_capacity(spec.folds);
    for held in &held_sets {
        let train = dataset.subset(&complement_rows(n, held))?;
        let test = dataset.subset(held)?;
        let labels = train.labels();
        if labels.iter().all(|&y| y == labels[0]) {
            log::warn!("cross-validation training fold carries a single class");
            single_class_folds += 1;
        }
        let fold_path = fit_path_on_grid(&train, &lambdas)?;
        let risks = fold_path
            .entries
            .iter()
            .map(|e| {
                let errors = (0..test.n())
                    .filter(|&i| e.predict(test.x1()[i], test.xt_row(i)) != test.labels()[i])
                    .count();
                errors as f64 / test.n() as f64
            })
            .collect();
        fold_risks.push(risks);
    }

    let k = spec.folds as f64;
    let mut mean_risk = Vec::with_capacity(lambdas.len());
    let mut se_risk = Vec::with_capacity(lambdas.len());
    for j in 0..lambdas.len() {
        let mean = fold_risks.iter().map(|f| f[j]).sum::<f64>() / k;
        let var = fold_risks
            .iter()
            .map(|f| (f[j] - mean) * (f[j] - mean))
            .sum::<f64>()
            / (k - 1.0);
        mean_risk.push(mean);
        se_risk.push((var / k).sqrt());
    }

    // Grid is descending, so the first strict minimum is the largest
    // penalty among ties.
    let mut opt_index = 0;
    for j in 1..mean_risk.len() {
        if mean_risk[j] < mean_risk[opt_index] {
            opt_index = j;
        }
    }
    let cutoff = mean_risk[opt_index] + se_risk[opt_index];
    let one_se_index = (0..mean_risk.len())
        .find(|&j| mean_risk[j] <= cutoff)
        .unwrap_or(opt_index);

    Ok(CvResult {
        lambda_opt: lambdas[opt_index],
        lambda_1se: lambdas[one_se_index],
        opt_index,
        one_se_index,
        path,
        mean_risk,
        se_risk,
        single_class_folds,
    })
}

/// A path entry rescaled into the fixed-`x1`-coefficient classifier form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub classifier: LinearClassifier,
    /// `|b1|` was below 1e-12; the coefficients are passed through raw so
    /// selection can still be judged, but the scale is meaningless.
    pub degenerate: bool,
    /// `b1 < 0`: dividing by the magnitude keeps the reported signs, but
    /// the fitted rule actually points the `x1` axis the other way.
    pub negative_beta1: bool,
}

/// Divide the intercept and penalized coefficients by `|b1|`, mapping the
/// intercept back onto the constant `xt` column when there is one.
pub fn normalize_to_classifier(path: &LassoPath, index: usize) -> Result<Normalized> {
    let entry = path
        .entries
        .get(index)
        .ok_or_else(|| Error::InvalidArgument(format!("no path entry {index}")))?;
    let degenerate = entry.beta1.abs() < DEGENERATE_BETA1;
    let scale = if degenerate { 1.0 } else { entry.beta1.abs() };
    let mut theta: Vec<f64> = entry.beta.iter().map(|b| b / scale).collect();
    match path.constant {
        Some((c, v)) => theta[c] = entry.intercept / (v * scale),
        None => {
            if entry.intercept.abs() > 1e-12 {
                log::warn!("no constant column to carry the normalized intercept");
            }
        }
    }
    if degenerate {
        log::warn!("x1 coefficient {} is numerically zero", entry.beta1);
    }
    Ok(Normalized {
        classifier: LinearClassifier::new(theta)?,
        degenerate,
        negative_beta1: entry.beta1 < 0.0,
    })
}

/// Largest absolute stationarity violation of a path entry: for zero
/// penalized coefficients the score `|(1/n) sum xs_ij (y_i - mu_i)|` may
/// not exceed `lambda`; for nonzero ones it must equal `lambda`.
pub fn kkt_max_violation(dataset: &Dataset, entry: &PathEntry) -> Result<f64> {
    let ws = Workspace::new(dataset)?;
    let n = dataset.n();
    let mut worst: f64 = 0.0;
    let mut resid = Vec::with_capacity(n);
    for i in 0..n {
        let lin = entry.linear_index(dataset.x1()[i], dataset.xt_row(i));
        resid.push(f64::from(dataset.labels()[i]) - logistic(lin));
    }
    for (slot, &j) in ws.penalized.iter().enumerate() {
        let g = (0..n)
            .map(|i| (dataset.xt_row(i)[j] - ws.mean[slot]) / ws.scale[slot] * resid[i])
            .sum::<f64>()
            / n as f64;
        let viol = if entry.beta[j].abs() > 1e-12 {
            (g.abs() - entry.lambda).abs()
        } else {
            (g.abs() - entry.lambda).max(0.0)
        };
        worst = worst.max(viol);
    }
    Ok(worst)
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Mutable solver state shared along a warm-started path.
struct Workspace {
    n: usize,
    p: usize,
    y: Vec<f64>,
    x1: Vec<f64>,
    /// Indices of penalized `xt` columns (everything but the constant).
    penalized: Vec<usize>,
    /// Standardized penalized columns, in `penalized` order.
    cols: Vec<Vec<f64>>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    constant: Option<(usize, f64)>,
    // Coefficients on the standardized scale.
    alpha: f64,
    b1: f64,
    b: Vec<f64>,
    /// Linear index per observation, kept in sync with the coefficients.
    lin: Vec<f64>,
}

impl Workspace {
    fn new(dataset: &Dataset) -> Result<Self> {
        let n = dataset.n();
        let p = dataset.p();
        let constant = dataset
            .constant_column()
            .map(|c| (c, dataset.xt_row(0)[c]));
        let penalized: Vec<usize> =
            (0..p).filter(|&j| Some(j) != constant.map(|(c, _)| c)).collect();
        if penalized.is_empty() {
            return Err(Error::InvalidArgument(
                "no penalized coordinates: xt is a lone constant column".into(),
            ));
        }
        let mut cols = Vec::with_capacity(penalized.len());
        let mut mean = Vec::with_capacity(penalized.len());
        let mut scale = Vec::with_capacity(penalized.len());
        for &j in &penalized {
            let raw = dataset.xt_col(j);
            let m = raw.iter().sum::<f64>() / n as f64;
            let var = raw.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
            let s = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
            cols.push(raw.iter().map(|x| (x - m) / s).collect());
            mean.push(m);
            scale.push(s);
        }
        Ok(Self {
            n,
            p,
            y: dataset.labels().iter().map(|&v| f64::from(v)).collect(),
            x1: dataset.x1().to_vec(),
            penalized,
            cols,
            mean,
            scale,
            constant,
            alpha: 0.0,
            b1: 0.0,
            b: vec![0.0; dataset.p()],
            lin: vec![0.0; n],
        })
    }

    /// Penalized average negative log-likelihood at the current state.
    fn objective(&self, lambda: f64) -> f64 {
        let mut nll = 0.0;
        for i in 0..self.n {
            let lin = self.lin[i];
            // ln(1 + e^lin) - y*lin, computed stably on both tails.
            nll += if lin > 0.0 {
                lin + (-lin).exp().ln_1p() - self.y[i] * lin
            } else {
                lin.exp().ln_1p() - self.y[i] * lin
            };
        }
        nll / self.n as f64
            + lambda * self.penalized.iter().enumerate().map(|(s, _)| self.b[s].abs()).sum::<f64>()
    }

    /// One IRLS linearization plus an inner coordinate-descent solve,
    /// with step-halving so the true objective never increases. Returns
    /// the largest coefficient move.
    fn outer_step(&mut self, lambda: f64) -> f64 {
        let n = self.n;
        let (alpha0, b10, b0) = (self.alpha, self.b1, self.b.clone());
        let before = self.objective(lambda);

        // Weights and working response at the expansion point.
        let mut w = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);
        for i in 0..n {
            let mu = logistic(self.lin[i]).clamp(MU_CLIP, 1.0 - MU_CLIP);
            let wi = mu * (1.0 - mu);
            w.push(wi);
            // Residual of the working response z = lin + (y - mu)/w.
            r.push((self.y[i] - mu) / wi);
        }
        let w_sum: f64 = w.iter().sum();
        let x1_den: f64 = (0..n).map(|i| w[i] * self.x1[i] * self.x1[i]).sum();
        let col_den: Vec<f64> = self
            .cols
            .iter()
            .map(|col| (0..n).map(|i| w[i] * col[i] * col[i]).sum::<f64>() / n as f64)
            .collect();

        for _ in 0..MAX_SWEEPS {
            let mut max_move: f64 = 0.0;

            let shift = (0..n).map(|i| w[i] * r[i]).sum::<f64>() / w_sum;
            self.alpha += shift;
            for ri in r.iter_mut() {
                *ri -= shift;
            }
            max_move = max_move.max(shift.abs());

            if x1_den > 1e-12 {
                let shift = (0..n).map(|i| w[i] * self.x1[i] * r[i]).sum::<f64>() / x1_den;
                self.b1 += shift;
                for i in 0..n {
                    r[i] -= shift * self.x1[i];
                }
                max_move = max_move.max(shift.abs());
            }

            for (slot, col) in self.cols.iter().enumerate() {
                let den = col_den[slot];
                if den <= 1e-12 {
                    continue;
                }
                let grad = (0..n).map(|i| w[i] * col[i] * r[i]).sum::<f64>() / n as f64;
                let u = self.b[slot] * den + grad;
                let new = soft_threshold(u, lambda) / den;
                let shift = new - self.b[slot];
                if shift != 0.0 {
                    self.b[slot] = new;
                    for i in 0..n {
                        r[i] -= shift * col[i];
                    }
                    max_move = max_move.max(shift.abs());
                }
            }
            if max_move < SWEEP_TOL {
                break;
            }
        }

        // Step-halving toward the expansion point: the inner solution is
        // a descent direction of the penalized likelihood, so some
        // fraction of the step cannot increase it.
        let mut t = 1.0;
        loop {
            self.recompute_lin();
            if self.objective(lambda) <= before + 1e-12 || t < 1e-12 {
                break;
            }
            t *= 0.5;
            self.alpha = alpha0 + t * (self.alpha - alpha0);
            self.b1 = b10 + t * (self.b1 - b10);
            for (bs, &b0s) in self.b.iter_mut().zip(&b0) {
                *bs = b0s + t * (*bs - b0s);
            }
        }

        let mut max_move = (self.alpha - alpha0).abs().max((self.b1 - b10).abs());
        for (bs, b0s) in self.b.iter().zip(&b0) {
            max_move = max_move.max((bs - b0s).abs());
        }
        max_move
    }

    fn recompute_lin(&mut self) {
        for i in 0..self.n {
            let mut lin = self.alpha + self.b1 * self.x1[i];
            for (slot, col) in self.cols.iter().enumerate() {
                if self.b[slot] != 0.0 {
                    lin += self.b[slot] * col[i];
                }
            }
            self.lin[i] = lin;
        }
    }

    /// Solve at one penalty level from the current warm start.
    fn fit(&mut self, lambda: f64) -> bool {
        for _ in 0..MAX_OUTER {
            if self.outer_step(lambda) < OUTER_TOL {
                return true;
            }
        }
        false
    }

    /// Null-model fit (penalized block forced to zero), then the largest
    /// penalized-score magnitude: the smallest penalty whose solution is
    /// the null model.
    fn profiled_lambda_max(&mut self) -> Result<(f64, bool)> {
        self.b.iter_mut().for_each(|b| *b = 0.0);
        // An effectively infinite penalty freezes the penalized block.
        let converged = self.fit(f64::MAX);
        if !converged {
            log::warn!("unpenalized profile fit did not converge");
        }
        let mut worst: f64 = 0.0;
        for col in &self.cols {
            let g = (0..self.n)
                .map(|i| col[i] * (self.y[i] - logistic(self.lin[i])))
                .sum::<f64>()
                / self.n as f64;
            worst = worst.max(g.abs());
        }
        if !(worst.is_finite() && worst > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "degenerate penalty grid start {worst}"
            )));
        }
        Ok((worst, converged))
    }

    /// Back-transform the current state into original-scale coefficients.
    fn entry(&self, lambda: f64, converged: bool) -> PathEntry {
        let mut beta = vec![0.0; self.p];
        let mut intercept = self.alpha;
        for (slot, &j) in self.penalized.iter().enumerate() {
            beta[j] = self.b[slot] / self.scale[slot];
            intercept -= self.b[slot] * self.mean[slot] / self.scale[slot];
        }
        PathEntry {
            lambda,
            intercept,
            beta1: self.b1,
            beta,
            converged,
        }
    }

    fn run_path(self, lambdas: &[f64]) -> Result<LassoPath> {
        self.run_path_from(lambdas, None)
    }

    /// `prefit` carries the convergence status of a state that already
    /// solves the first grid point exactly, which is then emitted as-is.
    fn run_path_from(mut self, lambdas: &[f64], prefit: Option<bool>) -> Result<LassoPath> {
        if lambdas.is_empty() {
            return Err(Error::InvalidArgument("empty penalty grid".into()));
        }
        if lambdas.windows(2).any(|w| w[0] <= w[1]) || lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidArgument(
                "penalty grid must be strictly decreasing and nonnegative".into(),
            ));
        }
        let mut entries = Vec::with_capacity(lambdas.len());
        for (k, &lambda) in lambdas.iter().enumerate() {
            let converged = match (k, prefit) {
                (0, Some(status)) => status,
                _ => self.fit(lambda),
            };
            if !converged {
                log::warn!("coordinate descent did not converge at lambda = {lambda}");
            }
            entries.push(self.entry(lambda, converged));
        }
        Ok(LassoPath {
            entries,
            constant: self.constant,
        })
    }
}

fn soft_threshold(u: f64, lambda: f64) -> f64 {
    if u > lambda {
        u - lambda
    } else if u < -lambda {
        u + lambda
    } else {
        0.0
    }
}
