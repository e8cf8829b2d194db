//! Globalized Newton method for one penalized subproblem.
//!
//! Each iteration solves `G δ = −F` on the coupled `(δy, δp, δu)` system and
//! uses `w = δu` when it passes the descent test `∇j·w ≤ −η‖w‖^p`
//! (L² norm); otherwise `w = −∇j` (lumped-mass Riesz representative).
//! The step length is chosen by Armijo backtracking `σ ∈ {1, φ, φ², …}`.
//! Iterates are kept consistent: `y = S(u)` and `p` the matching adjoint.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid_fem::{l2_norm, NodalField};
use crate::linalg::LuSolver;
use crate::objective::{linear_solve_error, NewtonOperator, PenalizedObjective};
use crate::problem::StateTriple;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub eta: f64,
    pub p_exp: f64,
    pub phi: f64,
    pub tau: f64,
    pub step_tol: f64,
    pub max_iter: usize,
    pub max_linesearch: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            eta: 1e-8,
            p_exp: 2.1,
            phi: 0.5,
            tau: 1e-4,
            step_tol: 1e-10,
            max_iter: 200,
            max_linesearch: 40,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return Err(invalid(format!("phi must lie in (0, 1), got {}", self.phi)));
        }
        if !(self.tau > 0.0 && self.tau < 0.5) {
            return Err(invalid(format!("tau must lie in (0, 1/2), got {}", self.tau)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.p_exp > 2.0 && self.p_exp.is_finite()) {
            return Err(invalid(format!("p_exp must exceed 2, got {}", self.p_exp)));
        }
        if !(self.step_tol > 0.0) {
            return Err(invalid(format!("step_tol must be positive, got {}", self.step_tol)));
        }
        if self.max_iter == 0 || self.max_linesearch == 0 {
            return Err(invalid("max_iter and max_linesearch must be positive"));
        }
        Ok(())
    }
}

/// Which search direction an iteration used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DirectionKind {
    Newton,
    SteepestDescent,
    Stationary,
}

#[derive(Debug, Clone)]
pub struct Direction {
    pub w: NodalField,
    pub kind: DirectionKind,
    /// `∇j(u)·w`.
    pub slope: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub linesearch_total: usize,
    pub fallback_steps: usize,
    pub final_step_norm: f64,
    pub converged: bool,
    /// `j` at the start point and after every accepted step.
    pub j_history: Vec<f64>,
    /// Every accepted step satisfied `j(u + σw) < j(u)`.
    pub monotone: bool,
    /// `σ` of every accepted step.
    pub step_sizes: Vec<f64>,
}

// Armijo can only fail from roundoff: the predicted decrease is below the
// resolution of `j`, or the whole direction is shorter than the step tolerance.
fn below_resolution(dir: &Direction, j: f64, mesh: &crate::grid_fem::Mesh, cfg: &NewtonConfig) -> bool {
    dir.slope.abs() <= 1e-12 * (1.0 + j.abs()) || l2_norm(mesh, dir.w.values()) < cfg.step_tol
}

/// Largest `σ = φ^l`, `l < max_linesearch`, with `Δ(σ) ≤ τ σ slope`, where
/// `delta(σ)` returns `j(u + σw) − j(u)`. Returns `Ok((σ, Δ(σ), trials))`,
/// or `Err(trials)` when no step is accepted.
pub fn armijo_backtrack(
    mut delta: impl FnMut(f64) -> Result<f64>,
    slope: f64,
    cfg: &NewtonConfig,
) -> Result<std::result::Result<(f64, f64, usize), usize>> {
    let mut sigma = 1.0;
    for trial in 1..=cfg.max_linesearch {
        let d = delta(sigma)?;
        if d.is_finite() && d <= cfg.tau * sigma * slope {
            return Ok(Ok((sigma, d, trial)));
        }
        sigma *= cfg.phi;
    }
    Ok(Err(cfg.max_linesearch))
}

/// Search direction from an already assembled Newton operator.
pub fn compute_direction_from_operator(
    obj: &PenalizedObjective<'_>,
    triple: &StateTriple,
    op: &NewtonOperator,
    cfg: &NewtonConfig,
    lu: &LuSolver,
) -> Result<Direction> {
    let problem = obj.problem();
    let mesh = problem.mesh();
    let g = obj.gradient_dual(triple);
    if g.iter().all(|&v| v == 0.0) {
        return Ok(Direction {
            w: NodalField::zeros(g.len()),
            kind: DirectionKind::Stationary,
            slope: 0.0,
        });
    }
    let rhs: Vec<f64> = obj.assemble_f(triple)?.stacked(problem).iter().map(|v| -v).collect();
    let newton = lu
        .factor(op.matrix())
        .map_err(linear_solve_error)
        .map(|f| f.solve(&rhs));
    if let Ok(x) = newton {
        let (_, _, w) = obj.unstack(&x, op.state_dim());
        if w.is_finite() {
            let slope = dot(&g, w.values());
            let norm = l2_norm(mesh, w.values());
            if slope <= -cfg.eta * norm.powf(cfg.p_exp) {
                return Ok(Direction {
                    w,
                    kind: DirectionKind::Newton,
                    slope,
                });
            }
        }
    }
    let w = NodalField::from_values(
        g.iter()
            .zip(mesh.lumped_mass())
            .map(|(v, m)| -v / m)
            .collect(),
    );
    let slope = dot(&g, w.values());
    Ok(Direction {
        w,
        kind: DirectionKind::SteepestDescent,
        slope,
    })
}

/// Newton direction with steepest-descent fallback at a consistent triple.
pub fn compute_direction(
    obj: &PenalizedObjective<'_>,
    triple: &StateTriple,
    cfg: &NewtonConfig,
    lu: &LuSolver,
) -> Result<Direction> {
    let op = obj.assemble_g(triple)?;
    compute_direction_from_operator(obj, triple, &op, cfg, lu)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of a line search along `w` from a consistent triple.
pub struct LineSearchStep {
    pub sigma: f64,
    pub delta_j: f64,
    pub trials: usize,
    pub u: NodalField,
    pub y: NodalField,
}

/// Armijo backtracking along `dir.w`; each trial re-solves the state equation.
pub fn line_search(
    obj: &PenalizedObjective<'_>,
    triple: &StateTriple,
    dir: &Direction,
    cfg: &NewtonConfig,
) -> Result<std::result::Result<LineSearchStep, usize>> {
    let problem = obj.problem();
    let mut last: Option<(f64, NodalField, NodalField)> = None;
    let outcome = armijo_backtrack(
        |sigma| {
            let u = triple.u.axpy(sigma, &dir.w);
            let y = match problem.solve_state_detailed(&u, Some(&triple.y)) {
                Ok(s) => s.y,
                // a trial that leaves the domain of the state solver is rejected
                Err(Error::SolverFailure { .. }) => return Ok(f64::INFINITY),
                Err(e) => return Err(e),
            };
            let d = obj.j_difference(&triple.u, &triple.y, &u, &y);
            last = Some((sigma, u, y));
            Ok(d)
        },
        dir.slope,
        cfg,
    )?;
    Ok(match outcome {
        Ok((sigma, delta_j, trials)) => {
            let (s, u, y) = last.expect("accepted trial was evaluated");
            debug_assert_eq!(s, sigma);
            Ok(LineSearchStep {
                sigma,
                delta_j,
                trials,
                u,
                y,
            })
        }
        Err(t) => Err(t),
    })
}

/// Runs the globalized Newton method from `u0`.
pub fn newton_solve(
    obj: &PenalizedObjective<'_>,
    u0: &NodalField,
    cfg: &NewtonConfig,
) -> Result<(StateTriple, NewtonReport)> {
    let start = obj.problem().triple(u0)?;
    newton_solve_warm(obj, start, cfg, &LuSolver::new())
}

/// Runs the globalized Newton method from a consistent triple, reusing the
/// symbolic factorization held by `lu`.
pub fn newton_solve_warm(
    obj: &PenalizedObjective<'_>,
    start: StateTriple,
    cfg: &NewtonConfig,
    lu: &LuSolver,
) -> Result<(StateTriple, NewtonReport)> {
    cfg.validate()?;
    let problem = obj.problem();
    let mesh = problem.mesh().clone();
    if !start.u.is_finite() {
        return Err(invalid("initial control has non-finite entries"));
    }
    let mut triple = start;
    let mut j = obj.eval_parts(&triple.u, &triple.y).total();
    let mut report = NewtonReport {
        j_history: vec![j],
        monotone: true,
        final_step_norm: f64::INFINITY,
        ..Default::default()
    };

    while report.iterations < cfg.max_iter {
        let mut dir = compute_direction(obj, &triple, cfg, lu)?;
        if dir.kind == DirectionKind::Stationary {
            report.converged = true;
            report.final_step_norm = 0.0;
            break;
        }
        let mut step = line_search(obj, &triple, &dir, cfg)?;
        let mut stalled = step.is_err() && below_resolution(&dir, j, &mesh, cfg);
        if step.is_err() && !stalled && dir.kind == DirectionKind::Newton {
            report.linesearch_total += step.as_ref().err().copied().unwrap_or(0);
            let g = obj.gradient_dual(&triple);
            let w = NodalField::from_values(
                g.iter().zip(mesh.lumped_mass()).map(|(v, m)| -v / m).collect(),
            );
            let slope = dot(&g, w.values());
            dir = Direction {
                w,
                kind: DirectionKind::SteepestDescent,
                slope,
            };
            step = line_search(obj, &triple, &dir, cfg)?;
            stalled = step.is_err() && below_resolution(&dir, j, &mesh, cfg);
        }
        let step = match step {
            Ok(s) => s,
            Err(trials) => {
                report.linesearch_total += trials;
                if stalled {
                    report.converged = true;
                    report.final_step_norm = 0.0;
                    break;
                }
                return Err(Error::Stagnation {
                    iteration: report.iterations + 1,
                    trials,
                    slope: dir.slope,
                    j,
                });
            }
        };
        report.iterations += 1;
        if dir.kind == DirectionKind::SteepestDescent {
            report.fallback_steps += 1;
        }
        report.step_sizes.push(step.sigma);
        report.linesearch_total += step.trials;
        if !(step.delta_j < 0.0) {
            report.monotone = false;
        }
        debug_assert!(step.delta_j <= cfg.tau * step.sigma * dir.slope);

        let p = problem.solve_adjoint(&step.y)?;
        let du = l2_norm(&mesh, step.u.sub(&triple.u).values());
        let dy = l2_norm(&mesh, step.y.sub(&triple.y).values());
        let dp = l2_norm(&mesh, p.sub(&triple.p).values());
        report.final_step_norm = du + dy + dp;
        triple = StateTriple {
            y: step.y,
            p,
            u: step.u,
        };
        j += step.delta_j;
        report.j_history.push(j);
        log::trace!(
            "newton it {:3} {:?} sigma {:.3e} step {:.3e} j {:.12e}",
            report.iterations,
            dir.kind,
            step.sigma,
            report.final_step_norm,
            j
        );
        if report.final_step_norm < cfg.step_tol {
            report.converged = true;
            break;
        }
    }
    Ok((triple, report))
}
