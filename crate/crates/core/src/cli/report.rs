//! Output files of a run: per-iteration records (CSV), final fields
//! (node-grid text) and a JSON summary.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::continuation::{ContinuationOutcome, ContinuationRecord, ContinuationStatus};
use crate::grid_fem::{fmt17, write_field_text, NodalField};
use crate::kernels::{lambda_a, lambda_b};
use crate::problem::ControlProblem;

const RECORD_COLUMNS: &str = "k,eps,rho,E_u,E_J,R_eps,R_rho,J_penalized,J_exact,newton_iters,linesearch,\
fallback_steps,lambda_a_norm,lambda_b_norm,lambda_sq_sum,grad_f_norm,violation";

fn opt(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

/// One CSV row per outer iteration; absent errors are empty cells.
pub fn records_csv(records: &[ContinuationRecord]) -> String {
    let mut s = String::from(RECORD_COLUMNS);
    s.push('\n');
    for r in records {
        let cells = [
            r.k.to_string(),
            fmt17(r.eps),
            fmt17(r.rho),
            opt(r.e_u),
            opt(r.e_j),
            fmt17(r.r_eps),
            fmt17(r.r_rho),
            fmt17(r.j_penalized),
            fmt17(r.j_exact),
            r.newton_iters.to_string(),
            r.linesearch.to_string(),
            r.fallback_steps.to_string(),
            fmt17(r.lambda_a_norm),
            fmt17(r.lambda_b_norm),
            fmt17(r.lambda_sq_sum),
            fmt17(r.grad_f_norm),
            fmt17(r.violation),
        ];
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub family: String,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub status: String,
    pub partial: bool,
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    pub eps_final: Option<f64>,
    pub rho_final: Option<f64>,
    pub j_penalized: Option<f64>,
    pub j_exact: Option<f64>,
    pub r_eps: Option<f64>,
    pub r_rho: Option<f64>,
}

pub fn status_label(status: &ContinuationStatus) -> String {
    match status {
        ContinuationStatus::Converged => "converged".into(),
        ContinuationStatus::MaxOuterReached => "max_outer_reached".into(),
        ContinuationStatus::Aborted(m) => format!("aborted: {m}"),
    }
}

pub fn summarize(problem: &ControlProblem, outcome: &ContinuationOutcome) -> Summary {
    let mesh = problem.mesh();
    let last = outcome.records.last();
    Summary {
        family: problem.spec().family.name().to_string(),
        nx: mesh.nx(),
        ny: mesh.ny(),
        h: mesh.h(),
        status: status_label(&outcome.status),
        partial: matches!(outcome.status, ContinuationStatus::Aborted(_)),
        outer_iterations: outcome.records.len(),
        newton_iterations: outcome.total_newton(),
        eps_final: last.map(|r| r.eps),
        rho_final: last.map(|r| r.rho),
        j_penalized: last.map(|r| r.j_penalized),
        j_exact: last.map(|r| r.j_exact),
        r_eps: last.map(|r| r.r_eps),
        r_rho: last.map(|r| r.r_rho),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(contents)
}

fn write_field(dir: &Path, problem: &ControlProblem, name: &str, field: &NodalField) -> io::Result<()> {
    let mut buf = Vec::new();
    write_field_text(&mut buf, problem.mesh(), name, field)?;
    write_file(&dir.join(format!("{name}.txt")), &buf)
}

/// Writes `records.csv`, `summary.json` and, when `fields` is set, the
/// final `u`, `y`, `p`, `lambda_a`, `lambda_b` into `dir`.
pub fn write_run_outputs(
    dir: &Path,
    problem: &ControlProblem,
    outcome: &ContinuationOutcome,
    fields: bool,
) -> io::Result<Summary> {
    fs::create_dir_all(dir)?;
    write_file(&dir.join("records.csv"), records_csv(&outcome.records).as_bytes())?;
    if fields {
        let t = &outcome.triple;
        write_field(dir, problem, "u", &t.u)?;
        write_field(dir, problem, "y", &t.y)?;
        write_field(dir, problem, "p", &t.p)?;
        if let Some(r) = outcome.records.last() {
            let bounds = &problem.spec().bounds;
            if let (Ok(la), Ok(lb)) = (lambda_a(r.rho, &t.u, bounds), lambda_b(r.rho, &t.u, bounds)) {
                write_field(dir, problem, "lambda_a", &la)?;
                write_field(dir, problem, "lambda_b", &lb)?;
            }
        }
    }
    let summary = summarize(problem, outcome);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&dir.join("summary.json"), json.as_bytes())?;
    Ok(summary)
}

/// One row per mesh with the columns `h, it, newt, eps_final, rho_final, J`.
pub fn sweep_table(rows: &[Summary]) -> String {
    let mut s = String::from("h,it,newt,eps_final,rho_final,J,status\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt17(r.h),
            r.outer_iterations,
            r.newton_iterations,
            opt(r.eps_final),
            opt(r.rho_final),
            opt(r.j_penalized),
            r.status
        ));
    }
    s
}
