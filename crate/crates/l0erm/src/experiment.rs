//! Monte Carlo harness: generate, fit, evaluate, aggregate.
//!
//! Each repetition draws an independent training and validation sample
//! from dedicated RNG streams (`2*rep` and `2*rep + 1` of the run seed),
//! fits every requested method on the training sample, evaluates the
//! fitted rules and the optimal rule on both samples, and emits one
//! record per (repetition, method). Method failures are recorded in
//! place and the aggregate is taken over the successes.
//!
//! Repetitions fan out across a rayon worker pool when the `parallel`
//! feature is on; [`run_experiment_sequential`] is always available and
//! produces identical results apart from wall-clock fields.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::{empirical_risk, ParameterBox};
use crate::data::Dataset;
use crate::dgp::{bayes_classifier, generate, DgpSpec};
use crate::erm::fit_penalized;
use crate::lasso::{cross_validate, normalize_to_classifier, CvResult, CvSpec};
use crate::metrics::{aggregate, MetricsReport, RepetitionRecord};
use crate::milp::MilpOptions;
use crate::tuning::{
    calibrate_v, heuristic_v, lambda_condition2, lambda_heuristic, CalibrationSpec,
};
use crate::{Error, Result, SELECTION_TOL};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fitting methods the harness can run. Serialized names match
/// [`Method::fmt`] so config files and output columns agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Penalized exact search over the parameter box.
    #[serde(rename = "l0erm")]
    L0Erm,
    /// Logit-lasso at the cross-validated risk minimizer.
    #[serde(rename = "lasso_opt")]
    LassoOpt,
    /// Logit-lasso at the one-standard-error penalty.
    #[serde(rename = "lasso_1se")]
    Lasso1se,
    /// Best intercept shift of `x1` alone.
    #[serde(rename = "intercept_only")]
    InterceptOnly,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::L0Erm => "l0erm",
            Self::LassoOpt => "lasso_opt",
            Self::Lasso1se => "lasso_1se",
            Self::InterceptOnly => "intercept_only",
        };
        f.write_str(name)
    }
}

/// How the penalized fit picks its penalty level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TuningRule {
    /// Plug-in multiplier `v = h(1-h)` into the slow-rate heuristic.
    Heuristic,
    /// Penalty `c sqrt(ln(p v n) / n)` at a caller-fixed constant.
    Condition2 { c: f64 },
    /// Caller-fixed penalty, no tuning.
    Fixed { lambda: f64 },
    /// Cross-validated multiplier over a grid, then the heuristic rate.
    Calibrated { grid: Vec<f64>, folds: usize },
}

fn default_n_train() -> usize {
    100
}
fn default_n_valid() -> usize {
    5000
}
fn default_repetitions() -> usize {
    100
}
fn default_box_half_width() -> f64 {
    10.0
}
fn default_time_limit_secs() -> f64 {
    60.0
}
fn default_methods() -> Vec<Method> {
    vec![Method::L0Erm, Method::LassoOpt, Method::Lasso1se]
}
fn default_tuning() -> TuningRule {
    TuningRule::Heuristic
}
fn default_lasso_folds() -> usize {
    10
}
fn default_lasso_grid_size() -> usize {
    100
}

/// Full description of one Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dgp: DgpSpec,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_valid")]
    pub n_valid: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Parameter box `[-w, w]^p` for the penalized fit.
    #[serde(default = "default_box_half_width")]
    pub box_half_width: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_tuning")]
    pub tuning: TuningRule,
    /// Wall-clock budget per penalized fit.
    #[serde(default = "default_time_limit_secs")]
    pub time_limit_secs: f64,
    #[serde(default)]
    pub node_limit: Option<u64>,
    /// Simplex pivot budget per fit; a deterministic alternative to the
    /// wall-clock limit.
    #[serde(default)]
    pub work_limit: Option<u64>,
    #[serde(default = "default_lasso_folds")]
    pub lasso_folds: usize,
    #[serde(default = "default_lasso_grid_size")]
    pub lasso_grid_size: usize,
    #[serde(default)]
    pub lasso_stratified: bool,
}

impl ExperimentConfig {
    pub fn new(dgp: DgpSpec) -> Self {
        Self {
            dgp,
            n_train: default_n_train(),
            n_valid: default_n_valid(),
            repetitions: default_repetitions(),
            seed: 0,
            box_half_width: default_box_half_width(),
            methods: default_methods(),
            tuning: default_tuning(),
            time_limit_secs: default_time_limit_secs(),
            node_limit: None,
            work_limit: None,
            lasso_folds: default_lasso_folds(),
            lasso_grid_size: default_lasso_grid_size(),
            lasso_stratified: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        for (name, v) in [
            ("n_train", self.n_train),
            ("n_valid", self.n_valid),
            ("repetitions", self.repetitions),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods requested".into()));
        }
        if !(self.box_half_width.is_finite() && self.box_half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "box half-width must be positive, got {}",
                self.box_half_width
            )));
        }
        if !(self.time_limit_secs.is_finite() && self.time_limit_secs > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time limit must be positive, got {}",
                self.time_limit_secs
            )));
        }
        match &self.tuning {
            TuningRule::Condition2 { c } if !(c.is_finite() && *c > 0.0) => {
                return Err(Error::InvalidArgument(format!("rate constant must be positive, got {c}")));
            }
            TuningRule::Fixed { lambda } if !(lambda.is_finite() && *lambda >= 0.0) => {
                return Err(Error::InvalidArgument(format!(
                    "fixed penalty must be nonnegative, got {lambda}"
                )));
            }
            _ => {}
        }
        Ok(())
    }

    fn milp_options(&self) -> MilpOptions {
        MilpOptions {
            time_limit: Some(std::time::Duration::from_secs_f64(self.time_limit_secs)),
            node_limit: self.node_limit,
            work_limit: self.work_limit,
            ..MilpOptions::default()
        }
    }
}

/// Method-specific facts worth keeping beside the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodDetail {
    L0Erm {
        lambda: f64,
        status: String,
        nodes: u64,
        best_bound: f64,
        objective: f64,
    },
    Lasso {
        lambda_opt: f64,
        lambda_1se: f64,
        single_class_folds: usize,
        degenerate: bool,
        negative_beta1: bool,
    },
    InterceptOnly {
        /// Best intercept shift.
        t_star: f64,
        /// Its in-sample risk, the `h` behind the plug-in multiplier.
        h: f64,
    },
    Failed,
}

/// One method's outcome within a repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub record: Option<RepetitionRecord>,
    pub failure: Option<String>,
    pub detail: MethodDetail,
}

/// All methods' outcomes for one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepReport {
    pub rep: usize,
    pub results: Vec<MethodResult>,
}

/// Per-method aggregate over the successful repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub successes: usize,
    pub failures: usize,
    /// Selection rows are meaningless for the intercept-only baseline.
    pub selection_applies: bool,
    pub metrics: Option<MetricsReport>,
    pub mean_runtime_secs: f64,
}

/// Everything one run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub reps: Vec<RepReport>,
    pub summaries: Vec<MethodSummary>,
}

/// Stream ids: sample draws use `2*rep` (train) and `2*rep + 1`
/// (validation); method-internal shuffles get mixed sub-seeds so no
/// method's consumption can perturb another's.
fn mixed_seed(seed: u64, rep: usize, salt: u64) -> u64 {
    let mut z = seed ^ (rep as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const LASSO_SALT: u64 = 1;
const CALIBRATION_SALT: u64 = 2;

fn failed(method: Method, err: &Error) -> MethodResult {
    MethodResult {
        method,
        record: None,
        failure: Some(err.to_string()),
        detail: MethodDetail::Failed,
    }
}

struct RepContext<'a> {
    config: &'a ExperimentConfig,
    rep: usize,
    train: Dataset,
    valid: Dataset,
    bayes_in: f64,
    bayes_out: f64,
}

impl RepContext<'_> {
    fn record(
        &self,
        in_risk: f64,
        out_risk: f64,
        theta: Vec<f64>,
        runtime: f64,
        gap: Option<f64>,
    ) -> Result<RepetitionRecord> {
        RepetitionRecord::new(
            self.rep,
            in_risk,
            out_risk,
            self.bayes_in,
            self.bayes_out,
            theta,
            runtime,
            gap,
        )
    }

    fn tuned_lambda(&self) -> Result<f64> {
        let cfg = self.config;
        match &cfg.tuning {
            TuningRule::Heuristic => {
                let v = heuristic_v(&self.train)?;
                lambda_heuristic(self.train.n(), self.train.p(), v)
            }
            TuningRule::Condition2 { c } => {
                lambda_condition2(*c, self.train.n(), self.train.p())
            }
            TuningRule::Fixed { lambda } => Ok(*lambda),
            TuningRule::Calibrated { grid, folds } => {
                let spec = CalibrationSpec {
                    grid: grid.clone(),
                    folds: *folds,
                    seed: mixed_seed(cfg.seed, self.rep, CALIBRATION_SALT),
                };
                let pbox = ParameterBox::symmetric(self.train.p(), cfg.box_half_width);
                Ok(calibrate_v(&self.train, &pbox, &spec, &cfg.milp_options())?.lambda)
            }
        }
    }

    fn run_l0erm(&self) -> MethodResult {
        let started = Instant::now();
        let fitted = self.tuned_lambda().and_then(|lambda| {
            let pbox = ParameterBox::symmetric(self.train.p(), self.config.box_half_width);
            fit_penalized(&self.train, lambda, &pbox, &self.config.milp_options())
        });
        let fit = match fitted {
            Ok(f) => f,
            Err(e) => return failed(Method::L0Erm, &e),
        };
        let runtime = started.elapsed().as_secs_f64();
        let gap = (fit.solver.incumbent_objective - fit.solver.best_bound).max(0.0);
        let out_risk = match empirical_risk(&self.valid, &fit.theta) {
            Ok(r) => r,
            Err(e) => return failed(Method::L0Erm, &e),
        };
        let record = match self.record(fit.risk, out_risk, fit.theta.clone(), runtime, Some(gap)) {
            Ok(r) => r,
            Err(e) => return failed(Method::L0Erm, &e),
        };
        MethodResult {
            method: Method::L0Erm,
            record: Some(record),
            failure: None,
            detail: MethodDetail::L0Erm {
                lambda: fit.lambda.unwrap_or(f64::NAN),
                status: format!("{:?}", fit.solver.status),
                nodes: fit.solver.nodes_explored,
                best_bound: fit.solver.best_bound,
                objective: fit.objective,
            },
        }
    }

    fn lasso_cv(&self) -> Result<(CvResult, f64)> {
        let cfg = self.config;
        let spec = CvSpec {
            folds: cfg.lasso_folds,
            seed: mixed_seed(cfg.seed, self.rep, LASSO_SALT),
            stratified: cfg.lasso_stratified,
            grid_size: cfg.lasso_grid_size,
            lambda_min_ratio: None,
        };
        let started = Instant::now();
        let cv = cross_validate(&self.train, &spec)?;
        Ok((cv, started.elapsed().as_secs_f64()))
    }

    /// Risks come from the raw lasso rule (its own `x1` coefficient and
    /// intercept); the rescaled coefficients are what selection judges.
    fn run_lasso(&self, method: Method, cv: &CvResult, runtime: f64) -> MethodResult {
        let index = match method {
            Method::LassoOpt => cv.opt_index,
            Method::Lasso1se => cv.one_se_index,
            _ => unreachable!("not a lasso method"),
        };
        let entry = &cv.path.entries[index];
        let normalized = match normalize_to_classifier(&cv.path, index) {
            Ok(n) => n,
            Err(e) => return failed(method, &e),
        };
        let risk_on = |ds: &Dataset| {
            let errors = (0..ds.n())
                .filter(|&i| entry.predict(ds.x1()[i], ds.xt_row(i)) != ds.labels()[i])
                .count();
            errors as f64 / ds.n() as f64
        };
        let record = match self.record(
            risk_on(&self.train),
            risk_on(&self.valid),
            normalized.classifier.theta.clone(),
            runtime,
            None,
        ) {
            Ok(r) => r,
            Err(e) => return failed(method, &e),
        };
        MethodResult {
            method,
            record: Some(record),
            failure: None,
            detail: MethodDetail::Lasso {
                lambda_opt: cv.lambda_opt,
                lambda_1se: cv.lambda_1se,
                single_class_folds: cv.single_class_folds,
                degenerate: normalized.degenerate,
                negative_beta1: normalized.negative_beta1,
            },
        }
    }

    fn run_intercept_only(&self) -> MethodResult {
        let started = Instant::now();
        let lo = self.train.x1().iter().fold(f64::INFINITY, |a, &v| a.min(-v)) - 1.0;
        let hi = self.train.x1().iter().fold(f64::NEG_INFINITY, |a, &v| a.max(-v)) + 1.0;
        let (t_star, h) = match crate::erm::fit_intercept_only(&self.train, lo, hi) {
            Ok(v) => v,
            Err(e) => return failed(Method::InterceptOnly, &e),
        };
        let runtime = started.elapsed().as_secs_f64();
        let mut theta = vec![0.0; self.train.p()];
        theta[0] = t_star;
        let out_risk = match empirical_risk(&self.valid, &theta) {
            Ok(r) => r,
            Err(e) => return failed(Method::InterceptOnly, &e),
        };
        let record = match self.record(h, out_risk, theta, runtime, None) {
            Ok(r) => r,
            Err(e) => return failed(Method::InterceptOnly, &e),
        };
        MethodResult {
            method: Method::InterceptOnly,
            record: Some(record),
            failure: None,
            detail: MethodDetail::InterceptOnly { t_star, h },
        }
    }
}

fn run_rep(config: &ExperimentConfig, rep: usize) -> Result<RepReport> {
    let train = generate(&config.dgp, config.n_train, config.seed, 2 * rep as u64)?;
    let valid = generate(&config.dgp, config.n_valid, config.seed, 2 * rep as u64 + 1)?;
    let bayes = bayes_classifier(&config.dgp)?;
    let ctx = RepContext {
        config,
        rep,
        bayes_in: empirical_risk(&train.dataset, &bayes.theta)?,
        bayes_out: empirical_risk(&valid.dataset, &bayes.theta)?,
        train: train.dataset,
        valid: valid.dataset,
    };

    let wants_lasso = config
        .methods
        .iter()
        .any(|m| matches!(m, Method::LassoOpt | Method::Lasso1se));
    let lasso_shared = if wants_lasso { Some(ctx.lasso_cv()) } else { None };

    let mut results = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let result = match method {
            Method::L0Erm => ctx.run_l0erm(),
            Method::LassoOpt | Method::Lasso1se => match lasso_shared.as_ref().unwrap() {
                Ok((cv, runtime)) => ctx.run_lasso(method, cv, *runtime),
                Err(e) => failed(method, e),
            },
            Method::InterceptOnly => ctx.run_intercept_only(),
        };
        results.push(result);
    }
    Ok(RepReport { rep, results })
}

fn assemble(config: &ExperimentConfig, reps: Vec<RepReport>) -> Result<ExperimentReport> {
    let mut summaries = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let records: Vec<RepetitionRecord> = reps
            .iter()
            .flat_map(|r| &r.results)
            .filter(|m| m.method == method)
            .filter_map(|m| m.record.clone())
            .collect();
        let failures = reps
            .iter()
            .flat_map(|r| &r.results)
            .filter(|m| m.method == method && m.failure.is_some())
            .count();
        if failures > 0 {
            log::warn!("{failures} of {} repetitions failed for {method}", config.repetitions);
        }
        let mean_runtime = if records.is_empty() {
            0.0
        } else {
            records.iter().map(|r| r.runtime_secs).sum::<f64>() / records.len() as f64
        };
        let metrics = if records.is_empty() {
            None
        } else {
            Some(aggregate(&records, 1, Some(0), SELECTION_TOL)?)
        };
        summaries.push(MethodSummary {
            method,
            successes: records.len(),
            failures,
            selection_applies: method != Method::InterceptOnly,
            metrics,
            mean_runtime_secs: mean_runtime,
        });
    }
    Ok(ExperimentReport {
        config: config.clone(),
        reps,
        summaries,
    })
}

/// Run every repetition on the current thread, in order.
pub fn run_experiment_sequential(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let reps = (0..config.repetitions)
        .map(|r| run_rep(config, r))
        .collect::<Result<Vec<_>>>()?;
    assemble(config, reps)
}

/// Run repetitions across the rayon pool (set the pool size through the
/// CLI flag or env var); identical to the sequential runner apart from
/// wall-clock fields.
#[cfg(feature = "parallel")]
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let reps = (0..config.repetitions)
        .into_par_iter()
        .map(|r| run_rep(config, r))
        .collect::<Result<Vec<_>>>()?;
    assemble(config, reps)
}

#[cfg(not(feature = "parallel"))]
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_sequential(config)
}

/// Zero every wall-clock field so reports can be compared for the
/// deterministic content.
pub fn strip_timing(report: &mut ExperimentReport) {
    for rep in &mut report.reps {
        for result in &mut rep.results {
            if let Some(record) = &mut result.record {
                record.runtime_secs = 0.0;
            }
        }
    }
    for summary in &mut report.summaries {
        summary.mean_runtime_secs = 0.0;
    }
}
