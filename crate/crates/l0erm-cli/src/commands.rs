//! The four subcommand bodies. Each takes plain values so tests can
//! drive them without a process boundary.

use std::path::{Path, PathBuf};

use l0erm::classifier::ParameterBox;
use l0erm::dgp::generate;
use l0erm::erm::{fit_intercept_only, fit_penalized};
use l0erm::experiment::{run_experiment, Method};
use l0erm::lasso::{cross_validate, normalize_to_classifier, CvSpec};
use l0erm::metrics::RepetitionRecord;
use l0erm::milp::MilpOptions;
use l0erm::theory::{empirical_cross_check, theory_report, TheoryInputs, TheoryReport};
use l0erm::tuning::{heuristic_v, lambda_condition2, lambda_heuristic};
use l0erm::Dataset;
use serde_json::json;

use crate::config::load_experiment_config;
use crate::output::{
    render_summary_text, write_manifest, write_records_csv, write_records_jsonl,
    write_summary_csv,
};
use crate::CliError;

fn io_ctx(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// Write per-repetition train/validation CSVs plus a manifest.
/// Returns the created file paths, manifest last.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let config = load_experiment_config(config_path)?;
    std::fs::create_dir_all(out_dir).map_err(io_ctx(out_dir))?;
    let mut written = Vec::new();
    for rep in 0..config.repetitions {
        let train = generate(&config.dgp, config.n_train, config.seed, 2 * rep as u64)?;
        let valid = generate(&config.dgp, config.n_valid, config.seed, 2 * rep as u64 + 1)?;
        for (name, sample) in [("train", &train), ("valid", &valid)] {
            let path = out_dir.join(format!("{name}_{rep:03}.csv"));
            sample.dataset.write_csv(&path, Some(&sample.eta))?;
            written.push(path);
        }
    }
    let manifest = out_dir.join("manifest.json");
    write_manifest(&manifest, &config, &config.dgp.theta_star())?;
    written.push(manifest);
    log::info!("wrote {} files to {}", written.len(), out_dir.display());
    Ok(written)
}

/// Methods `cmd_fit` accepts; `lasso` reports both selected penalties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FitMethod {
    L0erm,
    Lasso,
    InterceptOnly,
}

/// Penalty rules `cmd_fit` can apply when no explicit penalty is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TuningFlag {
    Heuristic,
    Condition2,
}

#[derive(Debug, Clone, clap::Args)]
pub struct FitArgs {
    /// Dataset CSV (header y,x1,x2,...).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub method: FitMethod,
    /// Explicit penalty level; bypasses tuning.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = TuningFlag::Heuristic)]
    pub tuning: TuningFlag,
    /// Rate constant for condition2 tuning.
    #[arg(long)]
    pub c: Option<f64>,
    /// Parameter box half-width.
    #[arg(long, default_value_t = 10.0)]
    pub box_half_width: f64,
    /// Wall-clock budget for the exact solve, in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub time_limit_secs: f64,
    #[arg(long)]
    pub node_limit: Option<u64>,
    /// Simplex pivot budget (deterministic alternative to time).
    #[arg(long)]
    pub work_limit: Option<u64>,
    /// Cross-validation folds for the lasso.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Penalty grid size for the lasso.
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    /// Stratify the lasso fold shuffle by label.
    #[arg(long)]
    pub stratified: bool,
    #[arg(long, default_value_t = 0)]
    pub cv_seed: u64,
    /// JSON-lines output path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit_lines(out: Option<&Path>, lines: &[serde_json::Value]) -> Result<(), CliError> {
    let mut text = String::new();
    for line in lines {
        text.push_str(&serde_json::to_string(line)?);
        text.push('\n');
    }
    match out {
        Some(path) => std::fs::write(path, text).map_err(io_ctx(path))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Fit one method on a dataset file and emit JSON-lines results.
pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let (dataset, _eta) = Dataset::read_csv(&args.data)?;
    let lines = match args.method {
        FitMethod::L0erm => fit_l0erm(args, &dataset)?,
        FitMethod::Lasso => fit_lasso(args, &dataset)?,
        FitMethod::InterceptOnly => fit_intercept(args, &dataset)?,
    };
    emit_lines(args.out.as_deref(), &lines)
}

fn fit_l0erm(args: &FitArgs, dataset: &Dataset) -> Result<Vec<serde_json::Value>, CliError> {
    let lambda = match args.lambda {
        Some(l) => l,
        None => match args.tuning {
            TuningFlag::Heuristic => {
                let v = heuristic_v(dataset)?;
                lambda_heuristic(dataset.n(), dataset.p(), v)?
            }
            TuningFlag::Condition2 => {
                let c = args.c.ok_or_else(|| {
                    CliError::Usage("condition2 tuning needs --c".into())
                })?;
                lambda_condition2(c, dataset.n(), dataset.p())?
            }
        },
    };
    let pbox = ParameterBox::symmetric(dataset.p(), args.box_half_width);
    let options = MilpOptions {
        time_limit: Some(std::time::Duration::from_secs_f64(args.time_limit_secs)),
        node_limit: args.node_limit,
        work_limit: args.work_limit,
        ..MilpOptions::default()
    };
    let started = std::time::Instant::now();
    let fit = fit_penalized(dataset, lambda, &pbox, &options)?;
    Ok(vec![json!({
        "method": "l0erm",
        "lambda": lambda,
        "tuned": args.lambda.is_none(),
        "theta": fit.theta,
        "support": fit.support,
        "l0": fit.l0,
        "in_risk": fit.risk,
        "objective": fit.objective,
        "status": format!("{:?}", fit.solver.status),
        "nodes": fit.solver.nodes_explored,
        "best_bound": fit.solver.best_bound,
        "runtime_secs": started.elapsed().as_secs_f64(),
    })])
}

fn fit_lasso(args: &FitArgs, dataset: &Dataset) -> Result<Vec<serde_json::Value>, CliError> {
    let spec = CvSpec {
        folds: args.folds,
        seed: args.cv_seed,
        stratified: args.stratified,
        grid_size: args.grid_size,
        lambda_min_ratio: None,
    };
    let started = std::time::Instant::now();
    let cv = cross_validate(dataset, &spec)?;
    let runtime = started.elapsed().as_secs_f64();
    let mut lines = Vec::new();
    for (name, index) in [("lasso_opt", cv.opt_index), ("lasso_1se", cv.one_se_index)] {
        let entry = &cv.path.entries[index];
        let normalized = normalize_to_classifier(&cv.path, index)?;
        let in_risk = (0..dataset.n())
            .filter(|&i| entry.predict(dataset.x1()[i], dataset.xt_row(i)) != dataset.labels()[i])
            .count() as f64
            / dataset.n() as f64;
        lines.push(json!({
            "method": name,
            "lambda": entry.lambda,
            "lambda_opt": cv.lambda_opt,
            "lambda_1se": cv.lambda_1se,
            "intercept": entry.intercept,
            "beta1": entry.beta1,
            "beta": entry.beta,
            "theta": normalized.classifier.theta,
            "degenerate": normalized.degenerate,
            "negative_beta1": normalized.negative_beta1,
            "in_risk": in_risk,
            "converged": entry.converged,
            "single_class_folds": cv.single_class_folds,
            "runtime_secs": runtime,
        }));
    }
    Ok(lines)
}

fn fit_intercept(_args: &FitArgs, dataset: &Dataset) -> Result<Vec<serde_json::Value>, CliError> {
    let lo = dataset.x1().iter().fold(f64::INFINITY, |a, &v| a.min(-v)) - 1.0;
    let hi = dataset.x1().iter().fold(f64::NEG_INFINITY, |a, &v| a.max(-v)) + 1.0;
    let started = std::time::Instant::now();
    let (t_star, h) = fit_intercept_only(dataset, lo, hi)?;
    let mut theta = vec![0.0; dataset.p()];
    theta[0] = t_star;
    Ok(vec![json!({
        "method": "intercept_only",
        "t_star": t_star,
        "h": h,
        "theta": theta,
        "in_risk": h,
        "runtime_secs": started.elapsed().as_secs_f64(),
    })])
}

/// Run the Monte Carlo study and write records, summaries, and a
/// manifest into `out_dir`. Returns the rendered summary table.
pub fn cmd_experiment(config_path: &Path, out_dir: &Path) -> Result<String, CliError> {
    let config = load_experiment_config(config_path)?;
    std::fs::create_dir_all(out_dir).map_err(io_ctx(out_dir))?;
    let report = run_experiment(&config)?;
    write_records_csv(&out_dir.join("records.csv"), &report)?;
    write_records_jsonl(&out_dir.join("records.jsonl"), &report)?;
    write_summary_csv(&out_dir.join("summary.csv"), &report.summaries)?;
    let table = render_summary_text(&report.summaries);
    std::fs::write(out_dir.join("summary.txt"), &table).map_err(io_ctx(out_dir))?;
    write_manifest(
        &out_dir.join("manifest.json"),
        &config,
        &config.dgp.theta_star(),
    )?;
    log::info!("experiment artifacts written to {}", out_dir.display());
    Ok(table)
}

#[derive(Debug, Clone, clap::Args)]
pub struct TheoryArgs {
    /// True sparsity.
    #[arg(long)]
    pub q: usize,
    #[arg(long)]
    pub epsilon: f64,
    /// Tail-decay exponent.
    #[arg(long)]
    pub sigma: f64,
    /// Concentration constant (supplied, never estimated).
    #[arg(long = "m-sigma")]
    pub m_sigma: f64,
    /// Penalty-rate constant.
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    /// Experiment config whose Monte Carlo frequencies to attach.
    #[arg(long)]
    pub empirical: Option<PathBuf>,
    /// JSON output path (stdout text always printed).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn render_theory_text(report: &TheoryReport) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "undefined".into());
    let mut text = format!(
        "lambda           {}\nm0               {}\nr_n              {}\ns                {}\n\
         j0               {}\ndelta            {}\ncondition_c_ok   {}\n\
         sparsity_tail    {}\nrisk_tail        {}\nrisk_threshold   {}\nmean_risk_bound  {}\n",
        report.lambda,
        report.m0,
        report.r_n,
        report.s,
        report
            .j0
            .map(|j| j.to_string())
            .unwrap_or_else(|| "undefined".into()),
        report.delta_theory,
        report.condition_c_ok,
        opt(report.sparsity_tail_bound),
        opt(report.risk_tail_bound),
        report.risk_threshold,
        opt(report.mean_risk_bound),
    );
    for check in &report.inequality_checks {
        text.push_str(&format!(
            "growth(k={})       lhs {} rhs {} -> {}\n",
            check.k,
            check.lhs,
            check.rhs,
            if check.holds { "holds" } else { "fails" }
        ));
    }
    text
}

/// Assemble the diagnostics report, optionally attach observed Monte
/// Carlo frequencies, print it, and write JSON when asked.
pub fn cmd_theory(args: &TheoryArgs) -> Result<String, CliError> {
    let inputs = TheoryInputs {
        q: args.q,
        epsilon: args.epsilon,
        sigma: args.sigma,
        m_sigma: args.m_sigma,
        c: args.c,
        n: args.n,
        p: args.p,
    };
    let report = theory_report(&inputs)?;
    let mut text = render_theory_text(&report);
    let mut payload = json!({ "report": report });

    if let Some(config_path) = &args.empirical {
        let mut config = load_experiment_config(config_path)?;
        if config.methods != [Method::L0Erm] {
            log::warn!("empirical cross-check runs the penalized method only");
            config.methods = vec![Method::L0Erm];
        }
        if config.n_train != args.n || config.dgp.p != args.p {
            log::warn!(
                "bounds are stated at n = {}, p = {} but the experiment runs n = {}, p = {}",
                args.n,
                args.p,
                config.n_train,
                config.dgp.p
            );
        }
        let run = run_experiment(&config)?;
        let records: Vec<&RepetitionRecord> = run
            .reps
            .iter()
            .flat_map(|r| &r.results)
            .filter_map(|m| m.record.as_ref())
            .collect();
        if records.is_empty() {
            return Err(CliError::Solver(
                "every repetition failed; nothing to cross-check".into(),
            ));
        }
        let supports: Vec<usize> = records.iter().map(|r| r.selected.len()).collect();
        let excess: Vec<f64> = records.iter().map(|r| r.excess_out_risk()).collect();
        let check = empirical_cross_check(&report, &supports, &excess)?;
        text.push_str(&format!(
            "observed P(support > s)       {} (bound {})\n\
             observed P(excess > 3*l*s)    {} (bound {})\n",
            check.freq_support_exceeds_s,
            check
                .sparsity_tail_bound
                .map(|b| b.to_string())
                .unwrap_or_else(|| "undefined".into()),
            check.freq_excess_exceeds_threshold,
            check
                .risk_tail_bound
                .map(|b| b.to_string())
                .unwrap_or_else(|| "undefined".into()),
        ));
        payload = json!({ "report": report, "empirical": check });
    }

    if let Some(path) = &args.out {
        let mut json_text = serde_json::to_string_pretty(&payload)?;
        json_text.push('\n');
        std::fs::write(path, json_text).map_err(io_ctx(path))?;
    }
    Ok(text)
}
