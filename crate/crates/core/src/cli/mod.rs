//! Configuration, reporting and the invariant suite used by the `bvpen`
//! binary.

pub mod checks;
pub mod config;
pub mod expr;
pub mod report;

use std::path::Path;

use crate::continuation::{compute_errors, run_continuation, ContinuationOutcome};
use crate::error::Error;
use crate::problem::ControlProblem;

pub use config::{ConfigError, ExperimentConfig};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const INVARIANT: i32 = 4;
}

/// Failure of a CLI command with its exit code.
#[derive(Debug)]
pub struct CommandError {
    pub code: i32,
    pub message: String,
}

impl CommandError {
    fn config(msg: impl Into<String>) -> Self {
        CommandError {
            code: exit::CONFIG,
            message: msg.into(),
        }
    }
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::config(e.0)
    }
}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => exit::CONFIG,
            _ => exit::SOLVER,
        };
        CommandError {
            code,
            message: e.to_string(),
        }
    }
}

/// Builds the problem and runs the continuation, filling the errors against
/// the final iterate.
pub fn solve(cfg: &ExperimentConfig) -> Result<(ControlProblem, ContinuationOutcome), CommandError> {
    let problem = cfg.build_problem()?;
    let mut outcome = run_continuation(&problem, &cfg.continuation, &cfg.newton)?;
    compute_errors(&problem, &mut outcome.records, &outcome.iterates)?;
    Ok((problem, outcome))
}

/// `bvpen run`: writes outputs into `out` (or the configured directory).
pub fn cmd_run(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<report::Summary, CommandError> {
    let (problem, outcome) = solve(cfg)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.dir.clone().into());
    let summary = report::write_run_outputs(&dir, &problem, &outcome, cfg.output.fields)
        .map_err(|e| CommandError::config(format!("cannot write outputs to {}: {e}", dir.display())))?;
    if summary.partial {
        return Err(CommandError {
            code: exit::SOLVER,
            message: format!("{} (partial outputs in {})", summary.status, dir.display()),
        });
    }
    Ok(summary)
}

/// `bvpen sweep`: one run per mesh, in parallel, returning the table rows in
/// the order of `meshes`.
pub fn cmd_sweep(cfg: &ExperimentConfig, meshes: &[usize]) -> Result<Vec<report::Summary>, CommandError> {
    if meshes.is_empty() || meshes.contains(&0) {
        return Err(CommandError::config("mesh list must contain positive sizes"));
    }
    let results: Vec<Result<report::Summary, CommandError>> = std::thread::scope(|s| {
        let handles: Vec<_> = meshes
            .iter()
            .map(|&n| {
                let c = cfg.with_mesh(n, n);
                s.spawn(move || -> Result<report::Summary, CommandError> {
                    let (problem, outcome) = solve(&c)?;
                    Ok(report::summarize(&problem, &outcome))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    results.into_iter().collect()
}

/// `bvpen check`: kernel identities, derivative checks and run invariants.
pub fn cmd_check(cfg: &ExperimentConfig) -> Result<Vec<checks::CheckResult>, CommandError> {
    let mut results = checks::kernel_checks();
    let problem = cfg.build_problem()?;
    results.extend(checks::calculus_checks(&problem)?);
    let outcome = run_continuation(&problem, &cfg.continuation, &cfg.newton)?;
    if let crate::continuation::ContinuationStatus::Aborted(m) = &outcome.status {
        return Err(CommandError {
            code: exit::SOLVER,
            message: m.clone(),
        });
    }
    results.extend(checks::run_invariants(&problem, &outcome));
    Ok(results)
}
