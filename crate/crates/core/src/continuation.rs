//! Outer continuation over `(ε_k, ρ_k)`.
//!
//! Iteration `k = 1, 2, …` solves the penalized subproblem with
//! `ε_k = ε₀·f_ε^(k−1)` and `ρ_k = ρ₀·f_ρ^(k−1)`, warm-started from the
//! previous iterate, then stops once `R^ρ_k ≤ tol_ρ` and `R^ε_k ≤ tol_ε`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid_fem::{grad_l1, l2_norm, lumped_l2_norm, NodalField};
use crate::linalg::LuSolver;
use crate::newton::{newton_solve_warm, NewtonConfig};
use crate::objective::{
    constraint_violation, residual_r_eps, residual_r_rho, PenalizedObjective, PenalizedParams,
};
use crate::problem::{ControlProblem, StateTriple};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationConfig {
    pub eps0: f64,
    pub eps_factor: f64,
    pub rho0: f64,
    pub rho_factor: f64,
    pub tol_r_rho: f64,
    pub tol_r_eps: f64,
    pub max_outer: usize,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            eps0: 0.5,
            eps_factor: 0.5,
            rho0: 2.0,
            rho_factor: 2.0,
            tol_r_rho: 1e-4,
            tol_r_eps: 1e-3,
            max_outer: 40,
        }
    }
}

impl ContinuationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(invalid(format!("eps0 must lie in (0, 1), got {}", self.eps0)));
        }
        if !(self.eps_factor > 0.0 && self.eps_factor < 1.0) {
            return Err(invalid(format!("eps_factor must lie in (0, 1), got {}", self.eps_factor)));
        }
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(invalid(format!("rho0 must be positive, got {}", self.rho0)));
        }
        if !(self.rho_factor > 1.0 && self.rho_factor.is_finite()) {
            return Err(invalid(format!("rho_factor must exceed 1, got {}", self.rho_factor)));
        }
        if !(self.tol_r_rho > 0.0 && self.tol_r_eps > 0.0) {
            return Err(invalid("residual tolerances must be positive"));
        }
        if self.max_outer == 0 {
            return Err(invalid("max_outer must be positive"));
        }
        Ok(())
    }

    /// `ε_k` for the 1-based outer index `k`.
    pub fn eps_at(&self, k: usize) -> f64 {
        self.eps0 * self.eps_factor.powi(k as i32 - 1)
    }

    /// `ρ_k` for the 1-based outer index `k`.
    pub fn rho_at(&self, k: usize) -> f64 {
        self.rho0 * self.rho_factor.powi(k as i32 - 1)
    }
}

/// Diagnostics of one converged subproblem. Norms are lumped L² norms
/// unless stated otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationRecord {
    pub k: usize,
    pub eps: f64,
    pub rho: f64,
    pub r_eps: f64,
    pub r_rho: f64,
    pub j_penalized: f64,
    /// `f(u) + β‖∇u‖_{L¹}`.
    pub j_exact: f64,
    pub newton_iters: usize,
    pub linesearch: usize,
    pub fallback_steps: usize,
    pub newton_converged: bool,
    /// Every accepted Newton step decreased `j`.
    pub monotone: bool,
    pub lambda_a_norm: f64,
    pub lambda_b_norm: f64,
    /// `‖λᵃ‖² + ‖λᵇ‖²`.
    pub lambda_sq_sum: f64,
    /// `max_i |λᵃ_i λᵇ_i|`.
    pub lambda_overlap: f64,
    /// `‖∇f(u)‖`.
    pub grad_f_norm: f64,
    /// `‖(u − u_b)₊‖ + ‖(u_a − u)₊‖`.
    pub violation: f64,
    pub tv: f64,
    pub u_norm: f64,
    /// `ρ² ≥ 1/(u_b − u_a)` at this iteration.
    pub penalty_regime: bool,
    /// `‖u_k − u_ref‖_{L²}` (consistent mass).
    pub e_u: Option<f64>,
    /// `|J_k − J_ref|` on the exact functional.
    pub e_j: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ContinuationStatus {
    Converged,
    MaxOuterReached,
    Aborted(String),
}

pub struct ContinuationOutcome {
    pub triple: StateTriple,
    pub records: Vec<ContinuationRecord>,
    /// `u_k` after every outer iteration.
    pub iterates: Vec<NodalField>,
    pub status: ContinuationStatus,
}

impl ContinuationOutcome {
    pub fn total_newton(&self) -> usize {
        self.records.iter().map(|r| r.newton_iters).sum()
    }

    pub fn converged(&self) -> bool {
        self.status == ContinuationStatus::Converged
    }
}

/// Diagnostics of `triple` as a solution of the `(ε, ρ)` subproblem.
pub fn record_for(
    problem: &ControlProblem,
    params: PenalizedParams,
    triple: &StateTriple,
    k: usize,
) -> Result<ContinuationRecord> {
    let obj = PenalizedObjective::new(problem, params)?;
    let mesh = problem.mesh();
    let spec = problem.spec();
    let u = &triple.u;
    let la = obj.lambda_a(u)?;
    let lb = obj.lambda_b(u)?;
    let la_norm = lumped_l2_norm(mesh, la.values());
    let lb_norm = lumped_l2_norm(mesh, lb.values());
    let overlap = la
        .values()
        .iter()
        .zip(lb.values())
        .map(|(a, b)| (a * b).abs())
        .fold(0.0, f64::max);
    let parts = obj.eval_parts(u, &triple.y);
    let tv = grad_l1(mesh, u)?;
    let gap = spec.bounds.min_gap(u.len());
    Ok(ContinuationRecord {
        k,
        eps: params.epsilon,
        rho: params.rho,
        r_eps: residual_r_eps(mesh, params.epsilon, u)?,
        r_rho: residual_r_rho(mesh, params.rho, u, &spec.bounds)?,
        j_penalized: parts.total(),
        j_exact: parts.smooth + spec.beta * tv,
        newton_iters: 0,
        linesearch: 0,
        fallback_steps: 0,
        newton_converged: true,
        monotone: true,
        lambda_a_norm: la_norm,
        lambda_b_norm: lb_norm,
        lambda_sq_sum: la_norm * la_norm + lb_norm * lb_norm,
        lambda_overlap: overlap,
        grad_f_norm: lumped_l2_norm(mesh, problem.reduced_gradient(triple).values()),
        violation: constraint_violation(mesh, u, &spec.bounds),
        tv,
        u_norm: lumped_l2_norm(mesh, u.values()),
        penalty_regime: params.rho * params.rho >= 1.0 / gap,
        e_u: None,
        e_j: None,
    })
}

/// Runs the continuation from `u₀ = 0`.
pub fn run_continuation(
    problem: &ControlProblem,
    cfg: &ContinuationConfig,
    newton_cfg: &NewtonConfig,
) -> Result<ContinuationOutcome> {
    let u0 = NodalField::zeros(problem.mesh().n_nodes());
    run_continuation_from(problem, &u0, cfg, newton_cfg)
}

/// Runs the continuation from the control `u0`. Configuration and input
/// errors are returned as `Err`; a failing subproblem ends the run with
/// [`ContinuationStatus::Aborted`] and the records gathered so far.
pub fn run_continuation_from(
    problem: &ControlProblem,
    u0: &NodalField,
    cfg: &ContinuationConfig,
    newton_cfg: &NewtonConfig,
) -> Result<ContinuationOutcome> {
    cfg.validate()?;
    newton_cfg.validate()?;
    let mut triple = problem.triple(u0)?;
    let lu = LuSolver::new();
    let mut records = Vec::new();
    let mut iterates = Vec::new();
    let mut status = ContinuationStatus::MaxOuterReached;
    for k in 1..=cfg.max_outer {
        let params = PenalizedParams::new(cfg.eps_at(k), cfg.rho_at(k))?;
        let obj = PenalizedObjective::new(problem, params)?;
        let (next, report) = match newton_solve_warm(&obj, triple.clone(), newton_cfg, &lu) {
            Ok(r) => r,
            Err(e @ (Error::Stagnation { .. } | Error::SolverFailure { .. } | Error::LinearSolve(_))) => {
                status = ContinuationStatus::Aborted(format!("outer iteration {k}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        triple = next;
        let mut rec = record_for(problem, params, &triple, k)?;
        rec.newton_iters = report.iterations;
        rec.linesearch = report.linesearch_total;
        rec.fallback_steps = report.fallback_steps;
        rec.newton_converged = report.converged;
        rec.monotone = report.monotone;
        log::info!(
            "k {:2} eps {:.3e} rho {:.3e} newton {:3} R_eps {:.3e} R_rho {:.3e} J {:.6e}",
            k,
            rec.eps,
            rec.rho,
            rec.newton_iters,
            rec.r_eps,
            rec.r_rho,
            rec.j_penalized
        );
        let done = rec.r_rho <= cfg.tol_r_rho && rec.r_eps <= cfg.tol_r_eps;
        records.push(rec);
        iterates.push(triple.u.clone());
        if done {
            status = ContinuationStatus::Converged;
            break;
        }
    }
    Ok(ContinuationOutcome {
        triple,
        records,
        iterates,
        status,
    })
}

/// Runs the continuation on the convex model of `problem` around `u_bar`,
/// starting at `u_bar`.
pub fn run_linearized(
    problem: &ControlProblem,
    u_bar: &NodalField,
    cfg: &ContinuationConfig,
    newton_cfg: &NewtonConfig,
) -> Result<ContinuationOutcome> {
    let spec = problem.linearized_objective(u_bar)?;
    let model = ControlProblem::new(problem.mesh().clone(), spec)?;
    run_continuation_from(&model, u_bar, cfg, newton_cfg)
}

/// Fills `e_u` and `e_j` of every record before the last against the final
/// iterate and its exact objective value.
pub fn compute_errors(
    problem: &ControlProblem,
    records: &mut [ContinuationRecord],
    iterates: &[NodalField],
) -> Result<()> {
    if records.len() != iterates.len() {
        return Err(invalid("records and iterates differ in length"));
    }
    let Some(last) = iterates.last() else {
        return Ok(());
    };
    let mesh = problem.mesh();
    for u in iterates {
        mesh.check_nodal(u, "compute_errors")?;
    }
    let j_ref = records[records.len() - 1].j_exact;
    let n = records.len();
    for (rec, u) in records[..n - 1].iter_mut().zip(iterates) {
        rec.e_u = Some(l2_norm(mesh, u.sub(last).values()));
        rec.e_j = Some((rec.j_exact - j_ref).abs());
    }
    records[n - 1].e_u = None;
    records[n - 1].e_j = None;
    Ok(())
}
