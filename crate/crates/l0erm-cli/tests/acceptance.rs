//! Release gates. Each test prints exactly one PASS/FAIL line (run with
//! `--nocapture` to see them as they complete); a FAIL line is followed
//! by a panic carrying the same detail. Gate 3 runs a real Monte Carlo
//! study under a one-minute-per-fit solver budget and dominates the
//! total runtime (roughly half an hour on one core).

use std::fmt::Write as _;
use std::path::Path;

use l0erm::classifier::{predict, ParameterBox};
use l0erm::dgp::{generate, logistic_cdf, logistic_sample, DgpSpec};
use l0erm::erm::{brute_force_minimum, fit_constrained, fit_penalized};
use l0erm::experiment::{run_experiment, ExperimentConfig, Method, MethodSummary};
use l0erm::lasso::{
    cross_validate, default_lambda_min_ratio, fit_logit_lasso_path, kkt_max_violation, CvSpec,
};
use l0erm::milp::MilpOptions;
use l0erm::theory::{sparsity_event_grid_check, theory_report, TheoryInputs};
use l0erm::tuning::lambda_heuristic;
use l0erm::Dataset;
use l0erm_cli::commands::cmd_experiment;

/// Print the criterion's verdict line and panic on failure.
fn gate(number: u32, name: &str, violations: &[String], detail: &str) {
    if violations.is_empty() {
        println!("criterion {number} ({name}): PASS — {detail}");
    } else {
        let msg = violations.join("; ");
        println!("criterion {number} ({name}): FAIL — {msg}");
        panic!("criterion {number} ({name}): {msg}");
    }
}

fn rel_close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= want.abs() * rel
}

#[test]
fn criterion_1_exact_solver_matches_brute_force() {
    let lambdas = [0.0, 0.05, 0.2];
    let mut violations = Vec::new();
    let mut worst_gap = 0.0f64;
    for i in 0..50u64 {
        let p = 2 + (i % 2) as usize;
        let n = 6 + (i % 7) as usize;
        let lambda = lambdas[(i % 3) as usize];
        let dataset = generate(&DgpSpec::variant_i(p), n, 1000 + i, 0)
            .unwrap()
            .dataset;
        let pbox = ParameterBox::symmetric(p, 10.0);
        let fit = fit_penalized(&dataset, lambda, &pbox, &MilpOptions::default()).unwrap();
        let oracle = brute_force_minimum(&dataset, lambda, &pbox).unwrap();
        let gap = (fit.objective - oracle.objective).abs();
        worst_gap = worst_gap.max(gap);
        if gap > 1e-9 {
            violations.push(format!(
                "instance {i} (n={n}, p={p}, lambda={lambda}): solver {} vs oracle {}",
                fit.objective, oracle.objective
            ));
        }
        // The optimum can never pay more in penalty than the worst
        // possible risk, so lambda * ||theta||_0 <= 1 on every fit.
        let penalty = lambda * fit.l0 as f64;
        if penalty > 1.0 + 1e-12 {
            violations.push(format!("instance {i}: penalty share {penalty} exceeds 1"));
        }
    }
    gate(
        1,
        "exact solver matches brute force",
        &violations,
        &format!("50 instances, worst objective gap {worst_gap:.2e}"),
    );
}

#[test]
fn criterion_2_penalized_equals_constrained_envelope() {
    let lambdas = [0.07, 0.11, 0.13];
    let mut violations = Vec::new();
    for i in 0..20u64 {
        let p = 2 + (i % 3) as usize;
        let n = 8 + (i % 5) as usize;
        // lambda * n * dm is never an integer for these levels, so no
        // two support sizes can tie and float equality is exact.
        let lambda = lambdas[(i % 3) as usize];
        let dataset = generate(&DgpSpec::variant_i(p), n, 2000 + i, 0)
            .unwrap()
            .dataset;
        let pbox = ParameterBox::symmetric(p, 10.0);
        let options = MilpOptions::default();
        let fit = fit_penalized(&dataset, lambda, &pbox, &options).unwrap();
        let penalized = fit.risk_milp + lambda * fit.l0 as f64;
        let envelope = (0..=p)
            .map(|m| {
                let constrained = fit_constrained(&dataset, m, &pbox, &options).unwrap();
                constrained.risk_milp + lambda * m as f64
            })
            .fold(f64::INFINITY, f64::min);
        if penalized != envelope {
            violations.push(format!(
                "instance {i} (n={n}, p={p}, lambda={lambda}): penalized {penalized} vs envelope {envelope}"
            ));
        }
    }
    gate(
        2,
        "penalized optimum equals the constrained-risk envelope",
        &violations,
        "20 instances, exact float equality",
    );
}

fn summary_for(summaries: &[MethodSummary], method: Method) -> &MethodSummary {
    summaries
        .iter()
        .find(|s| s.method == method)
        .unwrap_or_else(|| panic!("missing {method} summary"))
}

#[test]
fn criterion_3_desk_scale_study_reproduces_the_ordering() {
    let mut config = ExperimentConfig::new(DgpSpec::variant_i(10));
    config.n_train = 100;
    config.n_valid = 5000;
    config.repetitions = 20;
    config.seed = 42;
    config.methods = vec![Method::L0Erm, Method::LassoOpt];
    config.time_limit_secs = 60.0;
    let report = run_experiment(&config).unwrap();

    let mut violations = Vec::new();
    let exact = summary_for(&report.summaries, Method::L0Erm);
    if exact.failures > 0 {
        violations.push(format!("{} exact fits failed", exact.failures));
    }
    let em = exact.metrics.as_ref().expect("exact summary has metrics");
    if em.orac_sel < 0.75 {
        violations.push(format!("exact Orac_sel {} < 0.75", em.orac_sel));
    }
    if em.num_irrel > 0.5 {
        violations.push(format!("exact Num_irrel {} > 0.5", em.num_irrel));
    }
    if !(1.0..=1.35).contains(&em.out_rr) {
        violations.push(format!("exact out_RR {} outside [1.00, 1.35]", em.out_rr));
    }
    let lasso = summary_for(&report.summaries, Method::LassoOpt);
    let lm = lasso.metrics.as_ref().expect("lasso summary has metrics");
    if lm.corr_sel < 0.9 {
        violations.push(format!("lasso Corr_sel {} < 0.9", lm.corr_sel));
    }
    if lm.orac_sel != 0.0 {
        violations.push(format!("lasso Orac_sel {} != 0", lm.orac_sel));
    }
    let detail_p10 = format!(
        "p=10: exact Orac_sel {} Num_irrel {} out_RR {:.3}; lasso Corr_sel {} Orac_sel {}",
        em.orac_sel, em.num_irrel, em.out_rr, lm.corr_sel, lm.orac_sel
    );

    // Ten-repetition p = 50 smoke run: the qualitative ordering on
    // irrelevant selections must already be visible.
    let mut smoke = ExperimentConfig::new(DgpSpec::variant_i(50));
    smoke.n_train = 100;
    smoke.n_valid = 2000;
    smoke.repetitions = 10;
    smoke.seed = 7;
    smoke.methods = vec![Method::L0Erm, Method::LassoOpt];
    smoke.time_limit_secs = 60.0;
    let smoke_report = run_experiment(&smoke).unwrap();
    let smoke_exact = summary_for(&smoke_report.summaries, Method::L0Erm);
    let smoke_lasso = summary_for(&smoke_report.summaries, Method::LassoOpt);
    if smoke_exact.failures > 0 || smoke_lasso.failures > 0 {
        violations.push("smoke run had failed repetitions".into());
    }
    let se = smoke_exact.metrics.as_ref().expect("smoke exact metrics");
    let sl = smoke_lasso.metrics.as_ref().expect("smoke lasso metrics");
    if se.num_irrel >= sl.num_irrel {
        violations.push(format!(
            "smoke Num_irrel: exact {} !< lasso {}",
            se.num_irrel, sl.num_irrel
        ));
    }
    gate(
        3,
        "desk-scale study reproduces the selection ordering",
        &violations,
        &format!(
            "{detail_p10}; p=50 Num_irrel exact {} < lasso {}",
            se.num_irrel, sl.num_irrel
        ),
    );
}

#[test]
fn criterion_4_generator_statistics_hold() {
    let n = 50_000;
    let p = 5;
    let spec = DgpSpec::variant_i(p);
    let sample = generate(&spec, n, 4242, 0).unwrap();
    let dataset = &sample.dataset;
    let mut violations = Vec::new();

    // Latent vector V = (x1, xt[1..]); its sample covariance must sit
    // element-wise within 0.05 of 0.25^|j-k|.
    let column = |j: usize| -> Vec<f64> {
        if j == 0 {
            dataset.x1().to_vec()
        } else {
            dataset.xt_col(j)
        }
    };
    let cols: Vec<Vec<f64>> = (0..p).map(column).collect();
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let mut worst_cov = 0.0f64;
    for j in 0..p {
        for k in 0..p {
            let mut acc = 0.0;
            for i in 0..n {
                acc += (cols[j][i] - means[j]) * (cols[k][i] - means[k]);
            }
            let cov = acc / n as f64;
            let target = 0.25f64.powi((j as i32 - k as i32).abs());
            let err = (cov - target).abs();
            worst_cov = worst_cov.max(err);
            if err >= 0.05 {
                violations.push(format!("cov[{j}][{k}] = {cov} vs {target}"));
            }
        }
    }

    // Noise draws against the standard logistic CDF.
    let mut draws = logistic_sample(n, 4242, 9);
    draws.sort_by(f64::total_cmp);
    let mut ks = 0.0f64;
    for (i, &x) in draws.iter().enumerate() {
        let f = logistic_cdf(x);
        let hi = (i + 1) as f64 / n as f64;
        let lo = i as f64 / n as f64;
        ks = ks.max((f - hi).abs()).max((f - lo).abs());
    }
    if ks >= 0.02 {
        violations.push(format!("noise KS distance {ks} >= 0.02"));
    }

    // The threshold rule at theta* and the 1/2-level of eta must agree
    // on every draw.
    let mut mismatches = 0usize;
    for i in 0..n {
        let from_eta = u8::from(sample.eta[i] >= 0.5);
        let from_score = predict(&sample.theta_star, dataset.x1()[i], dataset.xt_row(i)).unwrap();
        if from_eta != from_score {
            mismatches += 1;
        }
    }
    if mismatches > 0 {
        violations.push(format!("Bayes identity failed on {mismatches} of {n} rows"));
    }
    gate(
        4,
        "generator statistics hold at n = 50000",
        &violations,
        &format!("worst covariance error {worst_cov:.4}, noise KS {ks:.4}, 0 identity mismatches"),
    );
}

/// Unpenalized logistic MLE by full Newton iteration with a dense
/// Gauss-Jordan solve; finite coefficients certify non-separation.
fn newton_logit_mle(dataset: &Dataset, skip_col: usize) -> Vec<f64> {
    let n = dataset.n();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![1.0, dataset.x1()[i]];
            for (j, &v) in dataset.xt_row(i).iter().enumerate() {
                if j != skip_col {
                    row.push(v);
                }
            }
            row
        })
        .collect();
    let k = rows[0].len();
    let mut beta = vec![0.0; k];
    for _ in 0..60 {
        let mut grad = vec![0.0; k];
        let mut hess = vec![vec![0.0; k]; k];
        for (i, row) in rows.iter().enumerate() {
            let z: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = 1.0 / (1.0 + (-z).exp());
            let w = mu * (1.0 - mu);
            let r = f64::from(dataset.labels()[i]) - mu;
            for a in 0..k {
                grad[a] += row[a] * r;
                for b in 0..k {
                    hess[a][b] += row[a] * row[b] * w;
                }
            }
        }
        // Solve hess * step = grad in place.
        let mut aug = hess;
        for (a, row) in aug.iter_mut().enumerate() {
            row.push(grad[a]);
        }
        for col in 0..k {
            let pivot = (col..k)
                .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
                .unwrap();
            aug.swap(col, pivot);
            let d = aug[col][col];
            for x in aug[col].iter_mut() {
                *x /= d;
            }
            for r in 0..k {
                if r != col {
                    let f = aug[r][col];
                    for c in 0..=k {
                        let base = aug[col][c];
                        aug[r][c] -= f * base;
                    }
                }
            }
        }
        let step: Vec<f64> = (0..k).map(|a| aug[a][k]).collect();
        let shift: f64 = step.iter().map(|s| s.abs()).fold(0.0, f64::max);
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
        }
        if shift < 1e-12 {
            break;
        }
    }
    assert!(
        beta.iter().all(|b| b.is_finite() && b.abs() < 20.0),
        "oracle MLE diverged; fixture is separable"
    );
    beta
}

#[test]
fn criterion_5_lasso_path_is_stationary_and_ordered() {
    let mut violations = Vec::new();
    let mut worst_kkt = 0.0f64;
    let sizes = [3usize, 5, 8];
    for i in 0..10u64 {
        let p = sizes[(i % 3) as usize];
        let n = 40 + 5 * i as usize;
        let dataset = generate(&DgpSpec::variant_i(p), n, 500 + i, 0)
            .unwrap()
            .dataset;
        let path =
            fit_logit_lasso_path(&dataset, 50, default_lambda_min_ratio(n, p)).unwrap();
        for entry in &path.entries {
            let viol = kkt_max_violation(&dataset, entry).unwrap();
            worst_kkt = worst_kkt.max(viol);
            if viol > 1e-6 {
                violations.push(format!(
                    "fixture {i}: KKT violation {viol:.2e} at lambda {}",
                    entry.lambda
                ));
            }
        }
    }

    // Endpoint of a long path on a tall fixture lands on the MLE; the
    // residual shrinkage bias is linear in the endpoint penalty.
    let dataset = generate(&DgpSpec::variant_i(3), 200, 909, 0).unwrap().dataset;
    let path = fit_logit_lasso_path(&dataset, 120, 1e-6).unwrap();
    let constant = path.constant.expect("constant column present").0;
    let end = path.entries.last().unwrap();
    let mle = newton_logit_mle(&dataset, constant);
    let mut fitted = vec![end.intercept, end.beta1];
    for (j, &b) in end.beta.iter().enumerate() {
        if j != constant {
            fitted.push(b);
        }
    }
    let endpoint_gap = fitted
        .iter()
        .zip(&mle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if endpoint_gap > 1e-3 {
        violations.push(format!("endpoint is {endpoint_gap:.2e} from the Newton MLE"));
    }

    let mut cv_runs = 0;
    for (seed, p) in [(21u64, 3usize), (22, 5), (23, 8)] {
        let dataset = generate(&DgpSpec::variant_i(p), 60, seed, 0).unwrap().dataset;
        let cv = cross_validate(
            &dataset,
            &CvSpec {
                folds: 5,
                seed,
                stratified: false,
                grid_size: 40,
                lambda_min_ratio: None,
            },
        )
        .unwrap();
        cv_runs += 1;
        if cv.lambda_1se < cv.lambda_opt {
            violations.push(format!(
                "CV on seed {seed}: lambda_1se {} < lambda_opt {}",
                cv.lambda_1se, cv.lambda_opt
            ));
        }
    }
    gate(
        5,
        "lasso path is stationary and ordered",
        &violations,
        &format!(
            "worst KKT {worst_kkt:.2e}, endpoint gap {endpoint_gap:.2e}, {cv_runs} ordered CV runs"
        ),
    );
}

fn check_digits(violations: &mut Vec<String>, name: &str, got: f64, want: f64) {
    if !rel_close(got, want, 1e-12) {
        violations.push(format!("{name}: got {got}, oracle {want}"));
    }
}

#[test]
fn criterion_6_tuning_and_theory_match_the_frozen_oracle() {
    let mut violations = Vec::new();
    check_digits(
        &mut violations,
        "lambda_heuristic(100, 200, 0.25)",
        lambda_heuristic(100, 200, 0.25).unwrap(),
        0.09595022582525775,
    );

    let report = theory_report(&TheoryInputs {
        q: 1,
        epsilon: 0.5,
        sigma: 1.0,
        m_sigma: 1.0,
        c: 8.0,
        n: 100,
        p: 200,
    })
    .unwrap();
    check_digits(&mut violations, "lambda", report.lambda, 1.841445930401092);
    check_digits(&mut violations, "s", report.s, 2.0);
    check_digits(&mut violations, "delta", report.delta_theory, 0.25);
    check_digits(
        &mut violations,
        "sparsity tail",
        report.sparsity_tail_bound.unwrap(),
        0.005,
    );
    check_digits(
        &mut violations,
        "risk tail",
        report.risk_tail_bound.unwrap(),
        0.01,
    );
    check_digits(
        &mut violations,
        "risk threshold",
        report.risk_threshold,
        11.048675582406553,
    );
    check_digits(
        &mut violations,
        "mean risk bound",
        report.mean_risk_bound.unwrap(),
        11.058675582406552,
    );
    if report.j0 != Some(1) {
        violations.push(format!("j0: got {:?}, oracle Some(1)", report.j0));
    }
    let growth: Vec<(usize, f64, f64, bool)> = vec![
        (1, 13.339114337131676, 13.61608353326738, true),
        (2, 28.326437672416855, 23.073283983175088, false),
    ];
    if report.inequality_checks.len() != growth.len() {
        violations.push(format!(
            "expected {} growth checks, got {}",
            growth.len(),
            report.inequality_checks.len()
        ));
    }
    for (ineq, (k, lhs, rhs, holds)) in report.inequality_checks.iter().zip(&growth) {
        if ineq.k != *k || ineq.holds != *holds {
            violations.push(format!("growth k={k}: structure mismatch"));
        }
        check_digits(&mut violations, &format!("growth lhs k={k}"), ineq.lhs, *lhs);
        check_digits(&mut violations, &format!("growth rhs k={k}"), ineq.rhs, *rhs);
    }

    let grid = sparsity_event_grid_check(10, 24).unwrap();
    if !grid.floor_equivalence_holds || !grid.inclusion_holds {
        violations.push("sparsity-event grid identities failed".into());
    }
    gate(
        6,
        "tuning and theory match the frozen oracle",
        &violations,
        &format!(
            "12-digit agreement on 11 scalars, {} symbolic grid cases",
            grid.cases
        ),
    );
}

#[test]
fn criterion_7_experiment_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.toml");
    std::fs::write(
        &config_path,
        "n_train = 60\nn_valid = 300\nrepetitions = 3\nseed = 13\n\
         methods = [\"l0erm\", \"lasso_opt\", \"lasso_1se\"]\n\
         time_limit_secs = 600.0\nwork_limit = 300000\n\n\
         [dgp]\nvariant = \"i\"\np = 5\n",
    )
    .unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    cmd_experiment(&config_path, &out_a).unwrap();
    cmd_experiment(&config_path, &out_b).unwrap();

    let mut violations = Vec::new();
    let mut detail = String::new();
    for name in ["records.csv", "summary.csv"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        if a == b {
            let _ = write!(detail, "{name} {} bytes identical; ", a.len());
        } else {
            violations.push(format!("{name} differs between identical runs"));
        }
    }
    gate(
        7,
        "experiment runs are byte-identical",
        &violations,
        detail.trim_end_matches("; "),
    );
}

/// Every shipped configuration file must parse and validate.
#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            l0erm_cli::config::load_experiment_config(&path)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert_eq!(seen, 6, "expected the six shipped configs in {}", dir.display());
}
