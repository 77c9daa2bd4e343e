//! Artifact writers: deterministic CSVs (no wall-clock fields), rich
//! JSON-lines (wall-clock included), an aligned summary table, and run
//! manifests. Floats in CSVs use the shortest round-trip encoding so a
//! rerun with the same seed reproduces every byte.

use std::fmt::Write as _;
use std::path::Path;

use l0erm::experiment::{ExperimentReport, Method, MethodResult, MethodSummary};
use serde::Serialize;

use crate::CliError;

fn fmt_float(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// One row per (repetition, method); timing deliberately excluded.
pub fn write_records_csv(path: &Path, report: &ExperimentReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(l0erm::Error::from)?;
    w.write_record([
        "rep",
        "method",
        "status",
        "in_risk",
        "out_risk",
        "bayes_in_risk",
        "bayes_out_risk",
        "l0",
        "selected",
        "solver_gap",
        "failure",
    ])
    .map_err(l0erm::Error::from)?;
    for rep in &report.reps {
        for result in &rep.results {
            let row = match &result.record {
                Some(r) => vec![
                    rep.rep.to_string(),
                    result.method.to_string(),
                    "ok".into(),
                    fmt_float(r.in_risk),
                    fmt_float(r.out_risk),
                    fmt_float(r.bayes_in_risk),
                    fmt_float(r.bayes_out_risk),
                    r.selected.len().to_string(),
                    r.selected
                        .iter()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join(";"),
                    fmt_opt(r.solver_gap),
                    String::new(),
                ],
                None => vec![
                    rep.rep.to_string(),
                    result.method.to_string(),
                    "failed".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    result.failure.clone().unwrap_or_default(),
                ],
            };
            w.write_record(&row).map_err(l0erm::Error::from)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RecordLine<'a> {
    rep: usize,
    #[serde(flatten)]
    result: &'a MethodResult,
}

/// One JSON object per (repetition, method), wall-clock fields and
/// solver details included.
pub fn write_records_jsonl(path: &Path, report: &ExperimentReport) -> Result<(), CliError> {
    let mut out = String::new();
    for rep in &report.reps {
        for result in &rep.results {
            let line = serde_json::to_string(&RecordLine { rep: rep.rep, result })?;
            out.push_str(&line);
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Per-method aggregate rows; timing deliberately excluded.
pub fn write_summary_csv(path: &Path, summaries: &[MethodSummary]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(l0erm::Error::from)?;
    w.write_record([
        "method",
        "successes",
        "failures",
        "corr_sel",
        "orac_sel",
        "num_irrel",
        "num_irrel_excl_intercept",
        "in_rr",
        "out_rr",
        "mean_excess_out_risk",
        "undefined_in_ratios",
        "undefined_out_ratios",
    ])
    .map_err(l0erm::Error::from)?;
    for s in summaries {
        let m = s.metrics.as_ref();
        let sel = m.filter(|_| s.selection_applies);
        w.write_record([
            s.method.to_string(),
            s.successes.to_string(),
            s.failures.to_string(),
            sel.map(|m| fmt_float(m.corr_sel)).unwrap_or_default(),
            sel.map(|m| fmt_float(m.orac_sel)).unwrap_or_default(),
            sel.map(|m| fmt_float(m.num_irrel)).unwrap_or_default(),
            sel.map(|m| fmt_float(m.num_irrel_excl_intercept))
                .unwrap_or_default(),
            m.map(|m| fmt_float(m.in_rr)).unwrap_or_default(),
            m.map(|m| fmt_float(m.out_rr)).unwrap_or_default(),
            m.map(|m| fmt_float(m.mean_excess_out_risk)).unwrap_or_default(),
            m.map(|m| m.undefined_in_ratios.to_string()).unwrap_or_default(),
            m.map(|m| m.undefined_out_ratios.to_string()).unwrap_or_default(),
        ])
        .map_err(l0erm::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

/// Aligned table, methods as columns: selection rows first, then the
/// relative risks. Cells without a meaningful value show a dash.
pub fn render_summary_text(summaries: &[MethodSummary]) -> String {
    let headers: Vec<String> = summaries.iter().map(|s| s.method.to_string()).collect();
    let cell = |s: &MethodSummary, selection_row: bool, f: &dyn Fn(&l0erm::metrics::MetricsReport) -> f64| {
        match &s.metrics {
            Some(m) if !selection_row || s.selection_applies => format!("{:.3}", f(m)),
            _ => "-".into(),
        }
    };
    let rows: Vec<(&str, Vec<String>)> = vec![
        (
            "Corr_sel",
            summaries.iter().map(|s| cell(s, true, &|m| m.corr_sel)).collect(),
        ),
        (
            "Orac_sel",
            summaries.iter().map(|s| cell(s, true, &|m| m.orac_sel)).collect(),
        ),
        (
            "Num_irrel",
            summaries.iter().map(|s| cell(s, true, &|m| m.num_irrel)).collect(),
        ),
        (
            "in_RR",
            summaries.iter().map(|s| cell(s, false, &|m| m.in_rr)).collect(),
        ),
        (
            "out_RR",
            summaries.iter().map(|s| cell(s, false, &|m| m.out_rr)).collect(),
        ),
        (
            "reps(ok/fail)",
            summaries
                .iter()
                .map(|s| format!("{}/{}", s.successes, s.failures))
                .collect(),
        ),
    ];

    let label_width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let mut widths: Vec<usize> = headers.iter().map(String::len).collect();
    for (_, cells) in &rows {
        for (w, c) in widths.iter_mut().zip(cells) {
            *w = (*w).max(c.len());
        }
    }

    let mut out = String::new();
    let _ = write!(out, "{:<label_width$}", "");
    for (&w, h) in widths.iter().zip(&headers) {
        let _ = write!(out, "  {h:>w$}");
    }
    out.push('\n');
    for (label, cells) in &rows {
        let _ = write!(out, "{label:<label_width$}");
        for (&w, c) in widths.iter().zip(cells) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    config: &'a C,
    theta_star: &'a [f64],
}

/// Pretty JSON echo of the run inputs; deterministic byte-for-byte.
pub fn write_manifest<C: Serialize>(
    path: &Path,
    config: &C,
    theta_star: &[f64],
) -> Result<(), CliError> {
    let manifest = Manifest { config, theta_star };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn method_label(method: Method) -> &'static str {
    match method {
        Method::L0Erm => "l0erm",
        Method::LassoOpt => "lasso_opt",
        Method::Lasso1se => "lasso_1se",
        Method::InterceptOnly => "intercept_only",
    }
}
