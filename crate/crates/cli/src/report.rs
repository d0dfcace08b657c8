//! Deterministic text and CSV output.

use std::fs;
use std::path::Path;

use paramop_core::C64;

use crate::run::{RunError, RunResults};

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_c(k: C64) -> String {
    format!("({}, {})", fmt_num(k.re), fmt_num(k.im))
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_else(|| "n/a".into())
}

pub fn verdict_token(converged: bool) -> &'static str {
    if converged {
        "CONVERGED"
    } else {
        "NOT_CONVERGING"
    }
}

pub fn emit_report(res: &RunResults) -> String {
    let mut out = String::new();
    out.push_str(&format!("problem: {}\nfamily: {}\n", res.problem, res.family));
    out.push_str(&format!(
        "tasks: {}\n",
        res.tasks.iter().map(|t| t.name()).collect::<Vec<_>>().join(", ")
    ));
    out.push_str(&format!("grid: {} points\n", res.grid.len()));
    for (name, lines) in &res.sections {
        out.push_str(&format!("\n[{name}]\n"));
        for l in lines {
            out.push_str(l);
            out.push('\n');
        }
    }
    out.push_str(&format!("\nfindings: {}\n", res.findings.len()));
    for f in &res.findings {
        out.push_str(&format!("- {f}\n"));
    }
    out.push_str(&format!(
        "status: {}\n",
        if res.findings.is_empty() { "OK" } else { "VIOLATION" }
    ));
    out
}

fn opt_cell(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn write_solutions(res: &RunResults, path: &Path) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k_re", "k_im", "node_index", "u_re", "u_im", "udot_re", "udot_im"])?;
    for r in &res.solutions {
        w.write_record([
            fmt_num(r.k.re),
            fmt_num(r.k.im),
            r.node.to_string(),
            fmt_num(r.u.re),
            fmt_num(r.u.im),
            opt_cell(r.udot.map(|d| d.re)),
            opt_cell(r.udot.map(|d| d.im)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_continuity(res: &RunResults, path: &Path) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k_re", "k_im", "h", "omega", "proxy_eq21"])?;
    for r in &res.continuity {
        w.write_record([fmt_num(r.k.re), fmt_num(r.k.im), fmt_num(r.h), fmt_num(r.omega), opt_cell(r.proxy)])?;
    }
    w.flush()?;
    Ok(())
}

/// Write `solutions.csv`, `continuity.csv`, `assumptions.txt` and `report.txt` into `dir`.
pub fn write_outputs(res: &RunResults, dir: &Path) -> Result<String, RunError> {
    fs::create_dir_all(dir)?;
    write_solutions(res, &dir.join("solutions.csv"))?;
    write_continuity(res, &dir.join("continuity.csv"))?;
    let assumptions = res
        .assumptions
        .clone()
        .unwrap_or_else(|| format!("problem: {}\nfamily: {}\nassumptions: not requested\n", res.problem, res.family));
    fs::write(dir.join("assumptions.txt"), assumptions)?;
    let report = emit_report(res);
    fs::write(dir.join("report.txt"), &report)?;
    Ok(report)
}
