//! Invariant suite behind `bvpen check`.
//!
//! Three groups: pointwise kernel identities, derivative checks of the
//! configured problem, and bounds that every converged subproblem of a
//! continuation run must satisfy. With non-constant bounds the multiplier
//! and BV bounds are reported as observations only.

use std::fmt;

use crate::continuation::ContinuationOutcome;
use crate::error::Result;
use crate::grid_fem::NodalField;
use crate::kernels::{MaxRho, Psi};
use crate::objective::{PenalizedObjective, PenalizedParams};
use crate::problem::{ControlProblem, StateTriple};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckOutcome {
    Pass,
    Fail,
    Observational,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub outcome: CheckOutcome,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.outcome {
            CheckOutcome::Pass => "PASS",
            CheckOutcome::Fail => "FAIL",
            CheckOutcome::Observational => "INFO",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn check(name: &str, ok: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        outcome: if ok { CheckOutcome::Pass } else { CheckOutcome::Fail },
        detail,
    }
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.outcome != CheckOutcome::Fail)
}

fn sample_vectors() -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for &r in &[0.0, 1e-6, 1e-3, 0.1, 0.7, 1.0, 3.0, 25.0, 1e3] {
        for k in 0..8 {
            let a = k as f64 * std::f64::consts::PI / 4.0 + 0.3;
            out.push([r * a.cos(), r * a.sin()]);
        }
    }
    out
}

const EPS_SAMPLES: [f64; 4] = [1e-6, 1e-3, 0.25, 0.5];
const RHO_SAMPLES: [f64; 4] = [0.5, 2.0, 1e3, 524288.0];

/// Pointwise identities of `ψ_ε`, `max_ρ` and `M_ρ`.
pub fn kernel_checks() -> Vec<CheckResult> {
    let ts = sample_vectors();
    let mut convex = f64::INFINITY;
    let mut lower = f64::INFINITY;
    let mut slope = f64::INFINITY;
    let mut monotone = true;
    let mut fd_err: f64 = 0.0;
    for (ie, &eps) in EPS_SAMPLES.iter().enumerate() {
        let psi = Psi::new(eps).expect("positive eps");
        for &t in &ts {
            let n = t[0].hypot(t[1]);
            let h = psi.hess(t);
            let tr = h[0][0] + h[1][1];
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            let lmin = 0.5 * tr - (0.25 * tr * tr - det).max(0.0).sqrt();
            convex = convex.min(lmin / (2.0 * eps));
            lower = lower.min(psi.value(t) - (n + eps * n * n));
            let g = psi.grad(t);
            slope = slope.min(g[0] * t[0] + g[1] * t[1] - (n - eps.sqrt()));
            if let Some(&next) = EPS_SAMPLES.get(ie + 1) {
                monotone &= psi.value(t) <= Psi::new(next).expect("positive eps").value(t);
            }
            if n < 100.0 {
                for d in 0..2 {
                    let step = 1e-6 * (1.0 + n);
                    let (mut a, mut b) = (t, t);
                    a[d] += step;
                    b[d] -= step;
                    let fd = (psi.value(a) - psi.value(b)) / (2.0 * step);
                    fd_err = fd_err.max((fd - g[d]).abs() / (1.0 + g[d].abs()));
                }
            }
        }
    }
    let mut cont: f64 = 0.0;
    let mut m_fd: f64 = 0.0;
    for &rho in &RHO_SAMPLES {
        let m = MaxRho::new(rho).expect("positive rho");
        let half = 0.5 / rho;
        for x0 in [half, -half] {
            let outer = if x0 > 0.0 { x0.max(0.0) } else { 0.0 };
            let outer_prime = if x0 > 0.0 { 1.0 } else { 0.0 };
            cont = cont.max((m.value(x0) - outer).abs());
            cont = cont.max((m.prime(x0) - outer_prime).abs());
        }
        for k in -20..=20 {
            let x = k as f64 * 0.1 / rho.sqrt();
            let step = 1e-4 * half.min(1.0);
            let fd = (m.antiderivative(x + step) - m.antiderivative(x - step)) / (2.0 * step);
            m_fd = m_fd.max((fd - m.value(x)).abs() / (1.0 + x.abs()));
        }
    }
    vec![
        check("psi_hessian_at_least_2eps", convex >= 1.0 - 1e-9, format!("min λ/(2ε) = {convex:.6}")),
        check("psi_above_abs_plus_quadratic", lower >= -1e-12, format!("min ψ−|t|−ε|t|² = {lower:.3e}")),
        check("psi_grad_slope_bound", slope >= -1e-12, format!("min ψ'·t−|t|+√ε = {slope:.3e}")),
        check("psi_monotone_in_eps", monotone, "ψ_ε nondecreasing in ε on samples".into()),
        check("psi_grad_finite_difference", fd_err <= 1e-6, format!("max rel err {fd_err:.3e}")),
        check("max_rho_branch_continuity", cont <= 1e-12, format!("max jump {cont:.3e}")),
        check("m_rho_derivative_is_max_rho", m_fd <= 1e-8, format!("max err {m_fd:.3e}")),
    ]
}

/// A smooth nonconstant test control on the mesh of `problem`.
pub fn probe_control(problem: &ControlProblem, scale: f64) -> NodalField {
    problem
        .mesh()
        .interpolate(|x, y| scale * ((1.3 * x + 0.4).sin() * (0.9 * y - 0.2).cos() + 0.3 * x * y))
}

fn probe_direction(problem: &ControlProblem) -> NodalField {
    problem
        .mesh()
        .interpolate(|x, y| (2.1 * y + 0.5).cos() + 0.5 * (1.7 * x).sin() - 0.2)
}

/// Central-difference check of `∇j` along a fixed direction; returns the
/// relative error.
pub fn gradient_check(problem: &ControlProblem, params: PenalizedParams, u: &NodalField, h: f64) -> Result<f64> {
    let obj = PenalizedObjective::new(problem, params)?;
    let v = probe_direction(problem);
    let triple = problem.triple(u)?;
    let g = obj.gradient_dual(&triple);
    let exact: f64 = g.iter().zip(v.values()).map(|(a, b)| a * b).sum();
    let up = u.axpy(h, &v);
    let um = u.axpy(-h, &v);
    let yp = problem.solve_state(&up)?;
    let ym = problem.solve_state(&um)?;
    let fd = obj.j_difference(&um, &ym, &up, &yp) / (2.0 * h);
    Ok((fd - exact).abs() / exact.abs().max(1e-300))
}

/// Taylor remainders `‖F(x + hδ) − F(x) − hGδ‖` for `h = h0` and `h0/10`.
pub fn taylor_remainders(problem: &ControlProblem, params: PenalizedParams, u: &NodalField, h0: f64) -> Result<(f64, f64)> {
    let obj = PenalizedObjective::new(problem, params)?;
    let mesh = problem.mesh();
    let base = problem.triple(u)?;
    let dir_u = probe_direction(problem);
    let interior = |f: NodalField| -> NodalField {
        let mut f = f;
        for i in 0..f.len() {
            if mesh.is_boundary(i) {
                f[i] = 0.0;
            }
        }
        f
    };
    let coupled = problem.spec().family.has_pde();
    let (dy, dp) = if coupled {
        (
            interior(mesh.interpolate(|x, y| (x + 2.0 * y).sin())),
            interior(mesh.interpolate(|x, y| (1.5 * x * y).cos())),
        )
    } else {
        (NodalField::zeros(mesh.n_nodes()), NodalField::zeros(mesh.n_nodes()))
    };
    let f0 = obj.assemble_f(&base)?.stacked(problem);
    let op = obj.assemble_g(&base)?;
    let mut delta = Vec::new();
    if coupled {
        delta.extend(problem.interior().iter().map(|&i| dy[i]));
        delta.extend(problem.interior().iter().map(|&i| dp[i]));
    }
    delta.extend_from_slice(dir_u.values());
    let gd = op.apply(&delta);
    let remainder = |h: f64| -> Result<f64> {
        let moved = StateTriple {
            y: base.y.axpy(h, &dy),
            p: base.p.axpy(h, &dp),
            u: base.u.axpy(h, &dir_u),
        };
        // families without a PDE keep y, p slaved to u
        let moved = if coupled { moved } else { problem.triple(&moved.u)? };
        let f1 = obj.assemble_f(&moved)?.stacked(problem);
        Ok(f1
            .iter()
            .zip(&f0)
            .zip(&gd)
            .map(|((a, b), c)| (a - b - h * c).powi(2))
            .sum::<f64>()
            .sqrt())
    };
    Ok((remainder(h0)?, remainder(h0 / 10.0)?))
}

/// Gradient and Taylor checks on the configured problem.
pub fn calculus_checks(problem: &ControlProblem) -> Result<Vec<CheckResult>> {
    let params = PenalizedParams::new(0.1, 10.0)?;
    let u = probe_control(problem, 1.0);
    let rel = gradient_check(problem, params, &u, 1e-4)?;
    let (r1, r2) = taylor_remainders(problem, params, &u, 1e-3)?;
    let ratio = r1 / r2;
    Ok(vec![
        check("reduced_gradient_vs_central_difference", rel <= 1e-5, format!("rel err {rel:.3e}")),
        check(
            "taylor_remainder_second_order",
            ratio >= 50.0 || r1 <= 1e-13,
            format!("r(1e-3) = {r1:.3e}, r(1e-4) = {r2:.3e}, ratio {ratio:.1}"),
        ),
    ])
}

/// Bounds at every converged subproblem of a run. `β`-scaled gradient:
/// `g = ∇f(u)/β`.
pub fn run_invariants(problem: &ControlProblem, outcome: &ContinuationOutcome) -> Vec<CheckResult> {
    let spec = problem.spec();
    let constant = spec.bounds.is_constant();
    let area = problem.mesh().domain_area();
    let mut out = Vec::new();
    let mut r_eps_min = f64::INFINITY;
    let mut overlap: f64 = 0.0;
    let mut lam_slack = f64::INFINITY;
    let mut viol_slack = f64::INFINITY;
    let mut bv_slack = f64::INFINITY;
    let mut lam_growth = Vec::new();
    let mut monotone = true;
    let mut checked = 0;
    for r in &outcome.records {
        r_eps_min = r_eps_min.min(r.r_eps);
        monotone &= r.monotone;
        lam_growth.push(r.lambda_sq_sum);
        if !(r.newton_converged && r.penalty_regime) || spec.beta <= 0.0 {
            continue;
        }
        checked += 1;
        let g = r.grad_f_norm / spec.beta;
        overlap = overlap.max(r.lambda_overlap);
        lam_slack = lam_slack.min(2.0 * g + 1e-6 - (r.lambda_a_norm + r.lambda_b_norm));
        viol_slack = viol_slack.min(2.0 * g / r.rho + 1e-8 - r.violation);
        bv_slack = bv_slack.min(3.0 * g * r.u_norm + r.eps.sqrt() * area + 1e-6 - r.tv);
    }
    out.push(check("r_eps_nonnegative", r_eps_min >= -1e-14, format!("min R^eps = {r_eps_min:.3e}")));
    out.push(check("armijo_monotone", monotone, "every accepted step decreased j".into()));
    out.push(check(
        "disjoint_multiplier_supports",
        overlap == 0.0,
        format!("max |λa·λb| = {overlap:.3e} over {checked} subproblems"),
    ));
    let mut bounded = vec![
        check("multiplier_bound", lam_slack >= 0.0, format!("min slack {lam_slack:.3e}")),
        check("constraint_violation_decay", viol_slack >= 0.0, format!("min slack {viol_slack:.3e}")),
        check("bv_bound", bv_slack >= 0.0, format!("min slack {bv_slack:.3e}")),
    ];
    if !constant {
        for c in &mut bounded {
            c.outcome = CheckOutcome::Observational;
            c.detail = format!("{} (non-constant bounds, observational only)", c.detail);
        }
        let series: Vec<String> = lam_growth.iter().map(|v| format!("{v:.3e}")).collect();
        out.push(CheckResult {
            name: "multiplier_norms".into(),
            outcome: CheckOutcome::Observational,
            detail: format!("‖λa‖²+‖λb‖² per iteration: [{}]", series.join(", ")),
        });
    }
    out.extend(bounded);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_suite_passes() {
        let r = kernel_checks();
        for c in &r {
            assert_eq!(c.outcome, CheckOutcome::Pass, "{c}");
        }
    }

    #[test]
    fn display_tags() {
        let c = check("x", false, "d".into());
        assert_eq!(c.to_string(), "FAIL x: d");
        assert!(!all_passed(&[c]));
    }
}
