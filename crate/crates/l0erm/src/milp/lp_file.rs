//! Text export in CPLEX LP format, for eyeballing a model or feeding it
//! to an external solver. Variables are named `x{j}` and rows `c{r}` in
//! problem order; numbers use shortest round-trip formatting.

use std::io::Write;

use super::{MilpProblem, Sense};
use crate::Result;

/// Write `problem` to `out` in LP format.
pub fn write_lp_format(problem: &MilpProblem, out: &mut dyn Write) -> Result<()> {
    problem.validate()?;
    writeln!(out, "\\ {} variables, {} constraints", problem.num_vars(), problem.constraints.len())?;
    writeln!(out, "Minimize")?;
    let mut obj = String::from(" obj:");
    let mut any = false;
    for (j, &c) in problem.objective.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        push_term(&mut obj, c, Some(j), any);
        any = true;
    }
    if problem.objective_constant != 0.0 {
        push_term(&mut obj, problem.objective_constant, None, any);
        any = true;
    }
    if !any {
        obj.push_str(" 0 x0");
    }
    writeln!(out, "{obj}")?;
    writeln!(out, "Subject To")?;
    for (r, con) in problem.constraints.iter().enumerate() {
        let mut line = format!(" c{r}:");
        let mut first = true;
        for &(j, v) in &con.coefs {
            if v == 0.0 {
                continue;
            }
            push_term(&mut line, v, Some(j), !first);
            first = false;
        }
        if first {
            line.push_str(" 0 x0");
        }
        let op = match con.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        writeln!(out, "{line} {op} {}", con.rhs)?;
    }
    writeln!(out, "Bounds")?;
    for j in 0..problem.num_vars() {
        if problem.is_binary[j] {
            continue;
        }
        let (l, u) = (problem.var_lower[j], problem.var_upper[j]);
        if l == f64::NEG_INFINITY && u == f64::INFINITY {
            writeln!(out, " x{j} free")?;
        } else {
            let lo = if l == f64::NEG_INFINITY {
                "-infinity".to_string()
            } else {
                format!("{l}")
            };
            let hi = if u == f64::INFINITY {
                "+infinity".to_string()
            } else {
                format!("{u}")
            };
            writeln!(out, " {lo} <= x{j} <= {hi}")?;
        }
    }
    let binaries: Vec<String> = (0..problem.num_vars())
        .filter(|&j| problem.is_binary[j])
        .map(|j| format!("x{j}"))
        .collect();
    if !binaries.is_empty() {
        writeln!(out, "Binaries")?;
        writeln!(out, " {}", binaries.join(" "))?;
    }
    writeln!(out, "End")?;
    Ok(())
}

fn push_term(line: &mut String, coef: f64, var: Option<usize>, follow: bool) {
    let mag = coef.abs();
    if follow {
        line.push_str(if coef < 0.0 { " -" } else { " +" });
    } else if coef < 0.0 {
        line.push_str(" -");
    } else {
        line.push(' ');
    }
    match var {
        Some(j) => {
            if mag == 1.0 {
                line.push_str(&format!("x{j}"));
            } else {
                line.push_str(&format!("{mag} x{j}"));
            }
        }
        None => line.push_str(&format!("{mag}")),
    }
}
