//! End-to-end checks: command bodies driven in-process for speed, plus
//! spawned-binary checks for exit codes and argument parsing.

use std::path::Path;
use std::process::Command;

use l0erm::dgp::{generate, DgpSpec};
use l0erm_cli::commands::{
    cmd_experiment, cmd_fit, cmd_simulate, cmd_theory, FitArgs, FitMethod, TheoryArgs, TuningFlag,
};
use l0erm_cli::CliError;
use tempfile::TempDir;

const SMALL_EXPERIMENT: &str = "\
n_train = 25
n_valid = 120
repetitions = 2
seed = 11
methods = [\"l0erm\", \"intercept_only\"]
work_limit = 500000

[dgp]
variant = \"i\"
p = 3

[tuning]
rule = \"heuristic\"
";

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn write_dataset(dir: &Path, n: usize, p: usize, seed: u64) -> std::path::PathBuf {
    let sample = generate(&DgpSpec::variant_i(p), n, seed, 0).unwrap();
    let path = dir.join("data.csv");
    sample.dataset.write_csv(&path, None).unwrap();
    path
}

fn fit_defaults(data: std::path::PathBuf, method: FitMethod) -> FitArgs {
    FitArgs {
        data,
        method,
        lambda: None,
        tuning: TuningFlag::Heuristic,
        c: None,
        box_half_width: 10.0,
        time_limit_secs: 60.0,
        node_limit: None,
        work_limit: Some(500_000),
        folds: 3,
        grid_size: 30,
        stratified: false,
        cv_seed: 0,
        out: None,
    }
}

fn read_jsonl(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn simulate_writes_deterministic_files() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "n_train = 20\nn_valid = 30\nrepetitions = 2\nseed = 5\nmethods = [\"l0erm\"]\n\n[dgp]\nvariant = \"i\"\np = 3\n",
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let files_a = cmd_simulate(&config, &out_a).unwrap();
    let files_b = cmd_simulate(&config, &out_b).unwrap();
    // Two repetitions, each a train/valid pair, plus the manifest.
    assert_eq!(files_a.len(), 5);
    for (a, b) in files_a.iter().zip(&files_b) {
        assert_eq!(a.file_name(), b.file_name());
        assert_eq!(
            std::fs::read(a).unwrap(),
            std::fs::read(b).unwrap(),
            "{} differs between identical runs",
            a.display()
        );
    }
    let train = std::fs::read_to_string(out_a.join("train_000.csv")).unwrap();
    assert!(train.starts_with("y,x1,"));
    assert!(train.trim_end().starts_with("y,x1"));
    assert_eq!(train.lines().count(), 21);
    // Simulated files carry the conditional label probability column.
    assert!(train.lines().next().unwrap().ends_with(",eta"));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_a.join("manifest.json")).unwrap())
            .unwrap();
    let theta_star: Vec<f64> = manifest["theta_star"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(theta_star, DgpSpec::variant_i(3).theta_star());
    assert_eq!(manifest["config"]["n_train"], 20);
}

#[test]
fn experiment_artifacts_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), SMALL_EXPERIMENT);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let table = cmd_experiment(&config, &out_a).unwrap();
    cmd_experiment(&config, &out_b).unwrap();
    assert!(table.contains("l0erm"));
    assert!(table.contains("out_RR"));
    for name in ["records.csv", "summary.csv"] {
        assert_eq!(
            std::fs::read(out_a.join(name)).unwrap(),
            std::fs::read(out_b.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
    assert_eq!(
        std::fs::read_to_string(out_a.join("summary.txt")).unwrap(),
        table
    );
    // Each record line is valid JSON with per-method timing attached.
    let lines = read_jsonl(&out_a.join("records.jsonl"));
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l["rep"].is_number()));

    let records = std::fs::read_to_string(out_a.join("records.csv")).unwrap();
    assert!(records.starts_with("rep,method,status,"));
    assert_eq!(records.lines().count(), 5);
}

#[test]
fn fit_echoes_an_explicit_penalty() {
    let dir = TempDir::new().unwrap();
    let data = write_dataset(dir.path(), 30, 3, 2);
    let out = dir.path().join("fit.jsonl");
    let mut args = fit_defaults(data, FitMethod::L0erm);
    args.lambda = Some(0.1);
    args.out = Some(out.clone());
    cmd_fit(&args).unwrap();
    let lines = read_jsonl(&out);
    assert_eq!(lines.len(), 1);
    let line = &lines[0];
    assert_eq!(line["method"], "l0erm");
    assert_eq!(line["lambda"].as_f64().unwrap(), 0.1);
    assert_eq!(line["tuned"], false);
    assert_eq!(
        line["support"].as_array().unwrap().len(),
        line["l0"].as_u64().unwrap() as usize
    );
    let objective = line["objective"].as_f64().unwrap();
    let l0 = line["l0"].as_u64().unwrap() as f64;
    assert!(objective + 1e-9 >= 0.1 * l0);
    assert_eq!(line["status"], "Optimal");
}

#[test]
fn fit_tunes_when_no_penalty_is_given() {
    let dir = TempDir::new().unwrap();
    let data = write_dataset(dir.path(), 30, 3, 2);
    let out = dir.path().join("fit.jsonl");
    let mut args = fit_defaults(data, FitMethod::L0erm);
    args.out = Some(out.clone());
    cmd_fit(&args).unwrap();
    let line = &read_jsonl(&out)[0];
    assert_eq!(line["tuned"], true);
    assert!(line["lambda"].as_f64().unwrap() > 0.0);
}

#[test]
fn fit_condition2_requires_the_constant() {
    let dir = TempDir::new().unwrap();
    let data = write_dataset(dir.path(), 20, 3, 2);
    let mut args = fit_defaults(data, FitMethod::L0erm);
    args.tuning = TuningFlag::Condition2;
    match cmd_fit(&args) {
        Err(CliError::Usage(msg)) => assert!(msg.contains("--c"), "{msg}"),
        other => panic!("expected usage error, got {other:?}"),
    }
}

#[test]
fn fit_lasso_reports_both_selected_penalties() {
    let dir = TempDir::new().unwrap();
    let data = write_dataset(dir.path(), 60, 3, 4);
    let out = dir.path().join("fit.jsonl");
    let mut args = fit_defaults(data, FitMethod::Lasso);
    args.out = Some(out.clone());
    cmd_fit(&args).unwrap();
    let lines = read_jsonl(&out);
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["method"], "lasso_opt");
    assert_eq!(lines[1]["method"], "lasso_1se");
    let opt = lines[0]["lambda_opt"].as_f64().unwrap();
    let one_se = lines[0]["lambda_1se"].as_f64().unwrap();
    assert!(one_se >= opt);
    assert_eq!(lines[0]["lambda"].as_f64().unwrap(), opt);
    assert_eq!(lines[1]["lambda"].as_f64().unwrap(), one_se);
    for line in &lines {
        assert!(line["in_risk"].as_f64().unwrap() <= 0.5);
        assert_eq!(line["theta"].as_array().unwrap().len(), 3);
    }
}

#[test]
fn fit_intercept_only_reports_the_marginal_rule() {
    let dir = TempDir::new().unwrap();
    let data = write_dataset(dir.path(), 40, 3, 6);
    let out = dir.path().join("fit.jsonl");
    let mut args = fit_defaults(data, FitMethod::InterceptOnly);
    args.out = Some(out.clone());
    cmd_fit(&args).unwrap();
    let line = &read_jsonl(&out)[0];
    assert_eq!(line["method"], "intercept_only");
    let h = line["h"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&h));
    assert_eq!(line["in_risk"].as_f64().unwrap(), h);
    let theta = line["theta"].as_array().unwrap();
    assert_eq!(theta.len(), 3);
    assert_eq!(theta[0].as_f64().unwrap(), line["t_star"].as_f64().unwrap());
    assert_eq!(theta[1].as_f64().unwrap(), 0.0);
}

#[test]
fn theory_report_round_trips_through_json() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("theory.json");
    let args = TheoryArgs {
        q: 1,
        epsilon: 0.5,
        sigma: 1.0,
        m_sigma: 1.0,
        c: 8.0,
        n: 100,
        p: 200,
        empirical: None,
        out: Some(out.clone()),
    };
    let text = cmd_theory(&args).unwrap();
    assert!(text.contains("lambda"));
    assert!(text.contains("growth(k=1)"));
    let payload: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let report = &payload["report"];
    assert_eq!(report["lambda"].as_f64().unwrap(), 1.841445930401092);
    assert_eq!(report["s"].as_f64().unwrap(), 2.0);
    assert_eq!(report["j0"].as_u64().unwrap(), 1);
    assert!(payload.get("empirical").is_none());
}

#[test]
fn theory_empirical_check_attaches_frequencies() {
    let dir = TempDir::new().unwrap();
    // Method list beyond the penalized fit is narrowed with a warning.
    let config = write_config(dir.path(), SMALL_EXPERIMENT);
    let out = dir.path().join("theory.json");
    let args = TheoryArgs {
        q: 1,
        epsilon: 0.5,
        sigma: 1.0,
        m_sigma: 1.0,
        c: 8.0,
        n: 25,
        p: 3,
        empirical: Some(config),
        out: Some(out.clone()),
    };
    let text = cmd_theory(&args).unwrap();
    assert!(text.contains("observed P(support > s)"));
    let payload: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(payload["empirical"]["reps"].as_u64().unwrap(), 2);
    let freq = payload["empirical"]["freq_support_exceeds_s"]
        .as_f64()
        .unwrap();
    assert!((0.0..=1.0).contains(&freq));
}

#[test]
fn summary_marks_selection_columns_inapplicable_for_intercept_only() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "n_train = 20\nn_valid = 50\nrepetitions = 1\nseed = 3\nmethods = [\"intercept_only\"]\n\n[dgp]\nvariant = \"i\"\np = 3\n",
    );
    let out = dir.path().join("run");
    let table = cmd_experiment(&config, &out).unwrap();
    let corr_row = table
        .lines()
        .find(|l| l.starts_with("Corr_sel"))
        .expect("selection row present");
    assert!(corr_row.contains('-'), "{corr_row}");

    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let data_line = summary.lines().nth(1).unwrap();
    assert!(data_line.starts_with("intercept_only,1,0,,,"));
}

#[test]
fn missing_required_flag_exits_with_usage_code() {
    let output = Command::new(env!("CARGO_BIN_EXE_l0erm"))
        .args(["theory", "--q", "1", "--epsilon", "0.5", "--sigma", "1.0"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("m-sigma"), "{stderr}");
}

#[test]
fn missing_data_file_exits_with_io_code() {
    let output = Command::new(env!("CARGO_BIN_EXE_l0erm"))
        .args([
            "fit",
            "--data",
            "/nonexistent/data.csv",
            "--method",
            "l0erm",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error:"), "{stderr}");
}

#[test]
fn theory_binary_prints_the_report() {
    let output = Command::new(env!("CARGO_BIN_EXE_l0erm"))
        .args([
            "theory", "--q", "1", "--epsilon", "0.5", "--sigma", "1.0", "--m-sigma", "1.0",
            "--c", "8.0", "--n", "100", "--p", "200",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("lambda           1.841445930401092"), "{stdout}");
    assert!(stdout.contains("condition_c_ok   true"));
}
