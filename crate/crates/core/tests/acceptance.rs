//! End-to-end acceptance suite: one PASS/FAIL line per criterion, then a
//! single assertion over all of them. Run with `--nocapture` to see the
//! lines; the heavy runs take several minutes.

mod common;

use std::sync::Arc;

use bvpen::cli::checks::{self, calculus_checks, kernel_checks, run_invariants, CheckOutcome};
use bvpen::continuation::{compute_errors, run_continuation, run_linearized, ContinuationConfig, ContinuationOutcome};
use bvpen::grid_fem::{l2_norm, Mesh, NodalField, Rect};
use bvpen::newton::{newton_solve, NewtonConfig};
use bvpen::objective::{PenalizedObjective, PenalizedParams};
use bvpen::problem::{Bounds, ControlProblem, Family, ProblemSpec};
use common::{tracking_problem, DenoiseOracle, OracleMesh};

struct Verdict {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

impl Verdict {
    fn print(&self) {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {} ({}): {}", self.id, self.name, self.detail);
    }
}

struct Run {
    label: &'static str,
    problem: ControlProblem,
    outcome: ContinuationOutcome,
    seconds: f64,
}

fn solve(label: &'static str, family: Family, n: usize) -> Run {
    let problem = tracking_problem(family, n);
    let t = std::time::Instant::now();
    let mut outcome = run_continuation(&problem, &ContinuationConfig::default(), &NewtonConfig::default())
        .unwrap_or_else(|e| panic!("{label}: {e}"));
    compute_errors(&problem, &mut outcome.records, &outcome.iterates).unwrap();
    Run {
        label,
        problem,
        outcome,
        seconds: t.elapsed().as_secs_f64(),
    }
}

fn kernels() -> Verdict {
    let results = kernel_checks();
    let failed: Vec<String> = results
        .iter()
        .filter(|r| r.outcome == CheckOutcome::Fail)
        .map(|r| r.to_string())
        .collect();
    Verdict {
        id: 1,
        name: "kernel exactness",
        pass: failed.is_empty() && !results.is_empty(),
        detail: if failed.is_empty() {
            format!("{} identities and derivative checks", results.len())
        } else {
            failed.join("; ")
        },
    }
}

fn calculus() -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    for fam in [Family::LinearTracking, Family::SemilinearTracking, Family::Denoising] {
        let pr = tracking_problem(fam.clone(), 8);
        let results = calculus_checks(&pr).unwrap();
        pass &= checks::all_passed(&results);
        for r in results {
            lines.push(format!("{}: {}", fam.name(), r.detail));
        }
    }
    Verdict {
        id: 2,
        name: "calculus correctness",
        pass,
        detail: lines.join("; "),
    }
}

fn oracle() -> Verdict {
    let (a, b, beta, eps, rho) = (-0.5, 1.0, 0.05, 0.01, 10.0);
    let mesh = Arc::new(Mesh::new(Rect::unit_symmetric(), 4, 4).unwrap());
    let data: Vec<f64> = mesh
        .nodes()
        .iter()
        .map(|p| if p[0].abs() < 0.6 && p[1].abs() < 0.6 { 1.4 } else { -0.9 } + 0.2 * (4.0 * p[0] - p[1]).cos())
        .collect();
    let spec = ProblemSpec::new(Family::Denoising, beta, NodalField::from_values(data.clone()), Bounds::constant(a, b).unwrap()).unwrap();
    let pr = ControlProblem::new(mesh.clone(), spec).unwrap();
    let dense = DenoiseOracle::new(OracleMesh::new(-1.0, 1.0, 4), data, beta, eps, rho, a, b);
    let u_star = dense.minimize(&vec![0.0; mesh.n_nodes()], 1e-12);
    let obj = PenalizedObjective::new(&pr, PenalizedParams::new(eps, rho).unwrap()).unwrap();
    let (triple, report) = newton_solve(&obj, &NodalField::zeros(mesh.n_nodes()), &NewtonConfig::default()).unwrap();
    let err = common::max_abs_diff(&triple.u, &NodalField::from_values(u_star));
    Verdict {
        id: 3,
        name: "oracle equivalence",
        pass: report.converged && err <= 1e-6,
        detail: format!("L∞ distance {err:.2e} (tol 1e-6), {} Newton steps", report.iterations),
    }
}

fn table_row(run: &Run, it: usize, j_ref: f64) -> (bool, String) {
    let last = run.outcome.records.last().unwrap();
    let iters = run.outcome.records.len();
    let ok_it = iters.abs_diff(it) <= 2;
    let ok_j = (last.j_penalized - j_ref).abs() <= 0.1 * j_ref;
    (
        run.outcome.converged() && ok_it && ok_j,
        format!(
            "{}: it {} (target {}±2), newt {}, J {:.5} (target {}±10%), {:.0}s",
            run.label,
            iters,
            it,
            run.outcome.total_newton(),
            last.j_penalized,
            j_ref,
            run.seconds
        ),
    )
}

fn rates(run: &Run) -> Verdict {
    let recs = &run.outcome.records;
    // six consecutive ratios over the final seven iterates
    let window = &recs[recs.len().saturating_sub(7)..];
    let ratios = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (1..window.len()).map(|i| f(i - 1) / f(i)).collect() };
    let r_eps = ratios(&|i| window[i].r_eps);
    let r_rho = ratios(&|i| window[i].r_rho);
    let e_u: Vec<f64> = window.iter().filter_map(|r| r.e_u).collect();
    let ok_eps = r_eps.len() == 6 && r_eps.iter().all(|r| (1.2..=1.8).contains(r));
    let ok_rho = r_rho.len() == 6 && r_rho.iter().all(|r| (1.7..=2.3).contains(r));
    let ok_eu = e_u.windows(2).all(|w| w[1] < w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    Verdict {
        id: 5,
        name: "rates on the linear problem",
        pass: run.outcome.converged() && ok_eps && ok_rho && ok_eu,
        detail: format!(
            "{}: R^eps ratios [{}] in [1.2,1.8]; R^rho ratios [{}] in [1.7,2.3]; E_u [{}] decreasing; {:.0}s",
            run.label,
            fmt(&r_eps),
            fmt(&r_rho),
            e_u.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" "),
            run.seconds
        ),
    }
}

fn invariants(runs: &[&Run]) -> Verdict {
    let wanted = ["disjoint_multiplier_supports", "multiplier_bound", "constraint_violation_decay"];
    let mut pass = true;
    let mut lines = Vec::new();
    for run in runs {
        let checked = run
            .outcome
            .records
            .iter()
            .filter(|r| r.newton_converged && r.penalty_regime)
            .count();
        pass &= checked > 0;
        for c in run_invariants(&run.problem, &run.outcome) {
            if wanted.contains(&c.name.as_str()) {
                pass &= c.outcome == CheckOutcome::Pass;
                lines.push(format!("{} {}", run.label, c));
            }
        }
    }
    Verdict {
        id: 6,
        name: "theory as invariants",
        pass,
        detail: lines.join("; "),
    }
}

fn monotone(runs: &[&Run], extra: &ContinuationOutcome) -> Verdict {
    let all = runs.iter().map(|r| &r.outcome).chain(std::iter::once(extra));
    let (mut subproblems, mut bad) = (0, 0);
    for out in all {
        for r in &out.records {
            subproblems += 1;
            bad += usize::from(!r.monotone);
        }
    }
    Verdict {
        id: 8,
        name: "monotone Armijo",
        pass: bad == 0 && subproblems > 0,
        detail: format!("{bad} non-monotone subproblems out of {subproblems}"),
    }
}

#[test]
fn acceptance_criteria() {
    let mut verdicts = vec![kernels(), calculus(), oracle()];
    for v in &verdicts {
        v.print();
    }

    let semi32 = solve("semilinear 32x32 (h≈0.088)", Family::SemilinearTracking, 32);
    let semi64 = solve("semilinear 64x64 (h≈0.044)", Family::SemilinearTracking, 64);
    let (p32, d32) = table_row(&semi32, 16, 0.0596);
    let (p64, d64) = table_row(&semi64, 19, 0.0685);
    let v4 = Verdict {
        id: 4,
        name: "semilinear table rows",
        pass: p32 && p64,
        detail: format!("{d32}; {d64}"),
    };
    v4.print();

    let lin128 = solve("linear 128x128", Family::LinearTracking, 128);
    let v5 = rates(&lin128);
    v5.print();

    let lin32 = solve("linear 32x32", Family::LinearTracking, 32);
    let v6 = invariants(&[&semi32, &semi64, &lin128, &lin32]);
    v6.print();

    let u_bar = lin32.outcome.triple.u.clone();
    let lin_model = run_linearized(&lin32.problem, &u_bar, &ContinuationConfig::default(), &NewtonConfig::default()).unwrap();
    let dist = l2_norm(lin32.problem.mesh(), lin_model.triple.u.sub(&u_bar).values());
    let v7 = Verdict {
        id: 7,
        name: "linearized model consistency",
        pass: lin32.outcome.converged() && lin_model.converged() && dist <= 1e-2,
        detail: format!(
            "‖u* − ū‖_L2 = {dist:.2e} (tol 1e-2) after {} outer iterations",
            lin_model.records.len()
        ),
    };
    v7.print();

    let v8 = monotone(&[&semi32, &semi64, &lin128, &lin32], &lin_model);
    v8.print();

    verdicts.extend([v4, v5, v6, v7, v8]);
    verdicts.sort_by_key(|v| v.id);
    println!("---");
    for v in &verdicts {
        v.print();
    }
    let failed: Vec<usize> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
