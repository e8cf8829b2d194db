//! The smooth part `f(u)` of the objective: state and adjoint solvers and
//! second-order information for the supported problem families.
//!
//! Discretization (P1, zero Dirichlet data for state and adjoint):
//!
//! * linear tracking: `K y = M u`, `f = ½ (y − y_d)ᵀ M (y − y_d)`, `K p = M (y − y_d)`;
//! * semilinear tracking: `K y + M_L y³ = M u` (vertex quadrature for the cubic
//!   term), `(K + 3 M_L y²) p = M (y − y_d)`;
//! * denoising: `y = u`, `p = u − g` with `g = y_d`;
//! * linearized: `f(u) = ⟨∇f(ū), u⟩ + ½‖u − ū‖²` around a fixed `ū`.
//!
//! In all cases the discrete gradient of `f` with respect to the nodal
//! coefficients is `M r` where `r` is the L² representative returned by
//! [`ControlProblem::reduced_gradient`].

use std::sync::Arc;

use log::debug;

use crate::error::{invalid, Error, Result};
use crate::grid_fem::{
    assemble_mass, assemble_stiffness, l2_inner, CsrMatrix, Mesh, NodalField,
};
use crate::linalg::{CholeskyFactor, CholeskySolver, TripletMatrix};

/// A bound given either as a constant or by its nodal values.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundValue {
    Constant(f64),
    Nodal(NodalField),
}

impl BoundValue {
    fn at(&self, i: usize) -> f64 {
        match self {
            BoundValue::Constant(c) => *c,
            BoundValue::Nodal(v) => v[i],
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            BoundValue::Constant(_) => None,
            BoundValue::Nodal(v) => Some(v.len()),
        }
    }
}

/// Box constraints `u_a ≤ u ≤ u_b`, evaluated at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: BoundValue,
    upper: BoundValue,
}

impl Bounds {
    pub fn new(lower: BoundValue, upper: BoundValue) -> Result<Bounds> {
        if let (Some(a), Some(b)) = (lower.len(), upper.len()) {
            if a != b {
                return Err(invalid("lower and upper nodal bounds differ in length"));
            }
        }
        let n = lower.len().or(upper.len()).unwrap_or(1);
        for i in 0..n {
            let (a, b) = (lower.at(i), upper.at(i));
            if a.is_nan() || b.is_nan() || !(a < b) {
                return Err(invalid(format!(
                    "bounds must satisfy u_a < u_b (node {i}: {a} vs {b})"
                )));
            }
        }
        Ok(Bounds { lower, upper })
    }

    pub fn constant(lower: f64, upper: f64) -> Result<Bounds> {
        Bounds::new(BoundValue::Constant(lower), BoundValue::Constant(upper))
    }

    /// `−∞ ≤ u ≤ ∞`: the penalty vanishes identically.
    pub fn inactive() -> Bounds {
        Bounds {
            lower: BoundValue::Constant(f64::NEG_INFINITY),
            upper: BoundValue::Constant(f64::INFINITY),
        }
    }

    pub fn lower(&self) -> &BoundValue {
        &self.lower
    }

    pub fn upper(&self) -> &BoundValue {
        &self.upper
    }

    pub fn lower_at(&self, i: usize) -> f64 {
        self.lower.at(i)
    }

    pub fn upper_at(&self, i: usize) -> f64 {
        self.upper.at(i)
    }

    pub fn is_constant(&self) -> bool {
        matches!(
            (&self.lower, &self.upper),
            (BoundValue::Constant(_), BoundValue::Constant(_))
        )
    }

    /// `min (u_b − u_a)` over the nodes (or the constant gap).
    pub fn min_gap(&self, n: usize) -> f64 {
        let m = if self.is_constant() { 1 } else { n };
        (0..m)
            .map(|i| self.upper_at(i) - self.lower_at(i))
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        for len in [self.lower.len(), self.upper.len()].into_iter().flatten() {
            if len != n {
                return Err(invalid(format!(
                    "nodal bound has {len} values but the field has {n}"
                )));
            }
        }
        Ok(())
    }
}

/// Data of a linearization `u ↦ ⟨∇f(ū), u⟩ + ½‖u − ū‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub u_bar: NodalField,
    /// L² representative of `∇f(ū)`.
    pub grad_bar: NodalField,
    pub y_bar: NodalField,
    pub p_bar: NodalField,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    LinearTracking,
    SemilinearTracking,
    Denoising,
    LinearizedAt(Box<Linearization>),
}

impl Family {
    /// State and adjoint are coupled to the control through a PDE.
    pub fn has_pde(&self) -> bool {
        matches!(self, Family::LinearTracking | Family::SemilinearTracking)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::LinearTracking => "linear",
            Family::SemilinearTracking => "semilinear",
            Family::Denoising => "denoising",
            Family::LinearizedAt(_) => "linearized",
        }
    }
}

/// Objective family, TV weight `β`, target `y_d` and box constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub family: Family,
    pub beta: f64,
    pub y_d: NodalField,
    pub bounds: Bounds,
}

impl ProblemSpec {
    pub fn new(family: Family, beta: f64, y_d: NodalField, bounds: Bounds) -> Result<Self> {
        // β = 0 is admitted for the degenerate test problems
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(invalid(format!("beta must be a finite non-negative number, got {beta}")));
        }
        if !y_d.is_finite() {
            return Err(invalid("target y_d contains non-finite values"));
        }
        Ok(ProblemSpec {
            family,
            beta,
            y_d,
            bounds,
        })
    }
}

/// State `y`, adjoint `p` and control `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTriple {
    pub y: NodalField,
    pub p: NodalField,
    pub u: NodalField,
}

/// Result of a state solve.
#[derive(Debug, Clone)]
pub struct StateSolve {
    pub y: NodalField,
    /// Inner Newton iterations (0 for linear state equations).
    pub iterations: usize,
    /// Final residual in the lumped L² dual norm.
    pub residual: f64,
}

/// Nodal coefficients of the second-order terms.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianTerms {
    /// Reaction coefficient `3y²` of the linearized state operator.
    pub reaction: Vec<f64>,
    /// Cross term `6yp` of the linearized adjoint equation.
    pub cross: Vec<f64>,
    /// `false` for families whose curvature is the plain mass matrix.
    pub coupled: bool,
}

pub const STATE_TOL: f64 = 1e-11;
pub const STATE_MAX_ITER: usize = 50;

/// A `ProblemSpec` bound to a mesh with its assembled operators.
pub struct ControlProblem {
    mesh: Arc<Mesh>,
    spec: ProblemSpec,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    interior: Vec<usize>,
    interior_map: Vec<Option<usize>>,
    identity_map: Vec<Option<usize>>,
    chol: CholeskySolver,
    poisson: Option<CholeskyFactor>,
}

impl ControlProblem {
    pub fn new(mesh: Arc<Mesh>, spec: ProblemSpec) -> Result<Self> {
        mesh.check_nodal(&spec.y_d, "target y_d")?;
        spec.bounds.check_len(mesh.n_nodes())?;
        if let Family::LinearizedAt(lin) = &spec.family {
            for f in [&lin.u_bar, &lin.grad_bar, &lin.y_bar, &lin.p_bar] {
                mesh.check_nodal(f, "linearization point")?;
            }
        }
        let mass = assemble_mass(&mesh);
        let stiffness = assemble_stiffness(&mesh);
        let interior = mesh.interior_nodes();
        let mut interior_map = vec![None; mesh.n_nodes()];
        for (k, &i) in interior.iter().enumerate() {
            interior_map[i] = Some(k);
        }
        let identity_map = (0..mesh.n_nodes()).map(Some).collect();
        let chol = CholeskySolver::new();
        let mut problem = ControlProblem {
            mesh,
            spec,
            mass,
            stiffness,
            interior,
            interior_map,
            identity_map,
            chol,
            poisson: None,
        };
        if problem.spec.family.has_pde() && !problem.interior.is_empty() {
            let k = problem.state_operator(None);
            problem.poisson = Some(problem.chol.factor(&k)?);
        }
        Ok(problem)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub(crate) fn interior_map(&self) -> &[Option<usize>] {
        &self.interior_map
    }

    pub(crate) fn identity_map(&self) -> &[Option<usize>] {
        &self.identity_map
    }

    /// `K_II + diag(reaction)_II` on the interior nodes.
    pub(crate) fn state_operator(&self, reaction: Option<&[f64]>) -> TripletMatrix {
        let mut a = TripletMatrix::new(self.interior.len());
        a.add_block(
            &self.stiffness,
            &self.interior_map,
            &self.interior_map,
            0,
            0,
            1.0,
        );
        if let Some(r) = reaction {
            let diag: Vec<f64> = self.interior.iter().map(|&i| r[i]).collect();
            a.add_diagonal(0, &diag);
        }
        a
    }

    fn restrict(&self, v: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&i| v[i]).collect()
    }

    fn extend(&self, v: &[f64]) -> NodalField {
        let mut out = NodalField::zeros(self.mesh.n_nodes());
        for (k, &i) in self.interior.iter().enumerate() {
            out[i] = v[k];
        }
        out
    }

    /// Solves the state equation for `u` starting from `y = 0`.
    pub fn solve_state(&self, u: &NodalField) -> Result<NodalField> {
        Ok(self.solve_state_detailed(u, None)?.y)
    }

    /// Solves the state equation, optionally warm-starting the inner Newton
    /// iteration of the semilinear family from `guess`.
    pub fn solve_state_detailed(&self, u: &NodalField, guess: Option<&NodalField>) -> Result<StateSolve> {
        self.mesh.check_nodal(u, "solve_state")?;
        match &self.spec.family {
            Family::Denoising => Ok(StateSolve {
                y: u.clone(),
                iterations: 0,
                residual: 0.0,
            }),
            Family::LinearizedAt(lin) => Ok(StateSolve {
                y: lin.y_bar.clone(),
                iterations: 0,
                residual: 0.0,
            }),
            Family::LinearTracking => {
                let y = match &self.poisson {
                    Some(f) => self.extend(&f.solve(&self.restrict(&self.mass.matvec(u.values())))),
                    None => NodalField::zeros(self.mesh.n_nodes()),
                };
                Ok(StateSolve {
                    y,
                    iterations: 0,
                    residual: 0.0,
                })
            }
            Family::SemilinearTracking => self.solve_semilinear_state(u, guess),
        }
    }

    // residual of K y + M_L y³ − M u on interior rows, and its lumped dual norm
    fn semilinear_residual(&self, y: &[f64], mu: &[f64]) -> (Vec<f64>, f64) {
        let ky = self.stiffness.matvec(y);
        let ml = self.mesh.lumped_mass();
        let mut r = Vec::with_capacity(self.interior.len());
        let mut norm2 = 0.0;
        for &i in &self.interior {
            let ri = ky[i] + ml[i] * y[i] * y[i] * y[i] - mu[i];
            norm2 += ri * ri / ml[i];
            r.push(ri);
        }
        (r, norm2.sqrt())
    }

    fn solve_semilinear_state(&self, u: &NodalField, guess: Option<&NodalField>) -> Result<StateSolve> {
        let n = self.mesh.n_nodes();
        let ml = self.mesh.lumped_mass();
        let mu = self.mass.matvec(u.values());
        let mut y = match guess {
            Some(g) if g.len() == n => {
                let mut y = g.values().to_vec();
                for (v, &b) in y.iter_mut().zip(self.mesh.boundary_flags()) {
                    if b {
                        *v = 0.0;
                    }
                }
                y
            }
            _ => vec![0.0; n],
        };
        let (mut r, mut norm) = self.semilinear_residual(&y, &mu);
        let mut iterations = 0;
        while norm > STATE_TOL {
            if iterations == STATE_MAX_ITER {
                return Err(Error::SolverFailure {
                    message: format!("semilinear state solve did not converge in {STATE_MAX_ITER} iterations"),
                    residual: norm,
                });
            }
            let reaction: Vec<f64> = y.iter().zip(ml).map(|(v, m)| 3.0 * m * v * v).collect();
            let jac = self.chol.factor(&self.state_operator(Some(&reaction)))?;
            let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = jac.solve(&neg_r);
            let mut step = 1.0;
            loop {
                let mut trial = y.clone();
                for (k, &i) in self.interior.iter().enumerate() {
                    trial[i] += step * delta[k];
                }
                let (rt, nt) = self.semilinear_residual(&trial, &mu);
                if nt < norm || step < 1e-10 {
                    if nt >= norm {
                        return Err(Error::SolverFailure {
                            message: "semilinear state solve stagnated".into(),
                            residual: norm,
                        });
                    }
                    y = trial;
                    r = rt;
                    norm = nt;
                    break;
                }
                step *= 0.5;
            }
            iterations += 1;
        }
        debug!("semilinear state: {iterations} iterations, residual {norm:.3e}");
        Ok(StateSolve {
            y: NodalField::from_values(y),
            iterations,
            residual: norm,
        })
    }

    /// Solves the adjoint equation for the state `y`.
    pub fn solve_adjoint(&self, y: &NodalField) -> Result<NodalField> {
        self.mesh.check_nodal(y, "solve_adjoint")?;
        match &self.spec.family {
            Family::Denoising => Ok(y.sub(&self.spec.y_d)),
            Family::LinearizedAt(lin) => Ok(lin.p_bar.clone()),
            Family::LinearTracking | Family::SemilinearTracking => {
                if self.interior.is_empty() {
                    return Ok(NodalField::zeros(self.mesh.n_nodes()));
                }
                let rhs = self.restrict(&self.mass.matvec(y.sub(&self.spec.y_d).values()));
                let p = match (&self.spec.family, &self.poisson) {
                    (Family::LinearTracking, Some(f)) => f.solve(&rhs),
                    _ => {
                        let reaction = self.reaction_coefficients(y);
                        self.chol.factor(&self.state_operator(Some(&reaction)))?.solve(&rhs)
                    }
                };
                Ok(self.extend(&p))
            }
        }
    }

    // lumped 3y² per node
    fn reaction_coefficients(&self, y: &NodalField) -> Vec<f64> {
        y.values()
            .iter()
            .zip(self.mesh.lumped_mass())
            .map(|(v, m)| 3.0 * m * v * v)
            .collect()
    }

    /// State and adjoint for `u`.
    pub fn triple(&self, u: &NodalField) -> Result<StateTriple> {
        let y = self.solve_state(u)?;
        let p = self.solve_adjoint(&y)?;
        Ok(StateTriple { y, p, u: u.clone() })
    }

    /// `f(u)` given the matching state `y`.
    pub fn smooth_value(&self, u: &NodalField, y: &NodalField) -> f64 {
        match &self.spec.family {
            Family::LinearizedAt(lin) => {
                let d = u.sub(&lin.u_bar);
                l2_inner(&self.mesh, lin.grad_bar.values(), u.values())
                    + 0.5 * l2_inner(&self.mesh, d.values(), d.values())
            }
            _ => {
                let d = y.sub(&self.spec.y_d);
                0.5 * l2_inner(&self.mesh, d.values(), d.values())
            }
        }
    }

    /// `f(u1) − f(u0)` evaluated without cancellation of the common part.
    pub fn smooth_difference(&self, u0: &NodalField, y0: &NodalField, u1: &NodalField, y1: &NodalField) -> f64 {
        match &self.spec.family {
            Family::LinearizedAt(lin) => {
                let du = u1.sub(u0);
                // ½‖u1−ū‖² − ½‖u0−ū‖² = ½ (u1−u0)·(u1+u0−2ū)
                let s: Vec<f64> = (0..du.len())
                    .map(|i| u1[i] + u0[i] - 2.0 * lin.u_bar[i])
                    .collect();
                l2_inner(&self.mesh, lin.grad_bar.values(), du.values())
                    + 0.5 * l2_inner(&self.mesh, du.values(), &s)
            }
            _ => {
                let dy = y1.sub(y0);
                let s: Vec<f64> = (0..dy.len())
                    .map(|i| y1[i] + y0[i] - 2.0 * self.spec.y_d[i])
                    .collect();
                0.5 * l2_inner(&self.mesh, dy.values(), &s)
            }
        }
    }

    /// L² representative of `∇f(u)`.
    pub fn reduced_gradient(&self, triple: &StateTriple) -> NodalField {
        match &self.spec.family {
            Family::LinearTracking | Family::SemilinearTracking => triple.p.clone(),
            Family::Denoising => triple.u.sub(&self.spec.y_d),
            Family::LinearizedAt(lin) => lin.grad_bar.axpy(1.0, &triple.u.sub(&lin.u_bar)),
        }
    }

    /// Discrete gradient `M ∇f(u)` with respect to the nodal coefficients.
    pub fn reduced_gradient_dual(&self, triple: &StateTriple) -> Vec<f64> {
        self.mass.matvec(self.reduced_gradient(triple).values())
    }

    pub fn hessian_terms(&self, triple: &StateTriple) -> HessianTerms {
        let n = self.mesh.n_nodes();
        match &self.spec.family {
            Family::LinearTracking => HessianTerms {
                reaction: vec![0.0; n],
                cross: vec![0.0; n],
                coupled: true,
            },
            Family::SemilinearTracking => HessianTerms {
                reaction: triple.y.values().iter().map(|v| 3.0 * v * v).collect(),
                cross: (0..n).map(|i| 6.0 * triple.y[i] * triple.p[i]).collect(),
                coupled: true,
            },
            Family::Denoising | Family::LinearizedAt(_) => HessianTerms {
                reaction: vec![0.0; n],
                cross: vec![0.0; n],
                coupled: false,
            },
        }
    }

    /// Reduced Hessian of `f` applied to `v` (dual vector). With
    /// `include_cross = false` the semilinear `6yp` term is dropped, giving
    /// the Gauss–Newton approximation.
    pub fn smooth_hessian_apply(&self, triple: &StateTriple, v: &NodalField, include_cross: bool) -> Result<Vec<f64>> {
        self.mesh.check_nodal(v, "smooth_hessian_apply")?;
        let terms = self.hessian_terms(triple);
        if !terms.coupled {
            return Ok(self.mass.matvec(v.values()));
        }
        if self.interior.is_empty() {
            return Ok(vec![0.0; v.len()]);
        }
        let ml = self.mesh.lumped_mass();
        let reaction: Vec<f64> = terms.reaction.iter().zip(ml).map(|(r, m)| r * m).collect();
        let op = self.chol.factor(&self.state_operator(Some(&reaction)))?;
        let dy = self.extend(&op.solve(&self.restrict(&self.mass.matvec(v.values()))));
        let mut rhs = self.mass.matvec(dy.values());
        if include_cross {
            for i in 0..rhs.len() {
                rhs[i] -= ml[i] * terms.cross[i] * dy[i];
            }
        }
        let dp = self.extend(&op.solve(&self.restrict(&rhs)));
        Ok(self.mass.matvec(dp.values()))
    }

    /// The `ProblemSpec` of the convex model `u ↦ ⟨∇f(ū), u⟩ + ½‖u − ū‖²` around `u_bar`.
    pub fn linearized_objective(&self, u_bar: &NodalField) -> Result<ProblemSpec> {
        let triple = self.triple(u_bar)?;
        let grad_bar = self.reduced_gradient(&triple);
        let lin = Linearization {
            u_bar: u_bar.clone(),
            grad_bar,
            y_bar: triple.y,
            p_bar: triple.p,
        };
        ProblemSpec::new(
            Family::LinearizedAt(Box::new(lin)),
            self.spec.beta,
            self.spec.y_d.clone(),
            self.spec.bounds.clone(),
        )
    }
}

/// Nodal interpolant of the indicator of the open square `(−0.5, 0.5)²`;
/// nodes on its edge get the value 0.
pub fn square_indicator_target(mesh: &Mesh) -> NodalField {
    mesh.interpolate(|x, y| {
        if x.abs() < 0.5 - 1e-12 && y.abs() < 0.5 - 1e-12 {
            1.0
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fem::Rect;

    fn problem(family: Family, n: usize) -> ControlProblem {
        let mesh = Arc::new(Mesh::new(Rect::unit_symmetric(), n, n).unwrap());
        let y_d = square_indicator_target(&mesh);
        let spec = ProblemSpec::new(family, 1e-4, y_d, Bounds::constant(-10.0, 10.0).unwrap()).unwrap();
        ControlProblem::new(mesh, spec).unwrap()
    }

    #[test]
    fn zero_control_gives_zero_state() {
        for fam in [Family::LinearTracking, Family::SemilinearTracking, Family::Denoising] {
            let pr = problem(fam, 6);
            let u = NodalField::zeros(pr.mesh().n_nodes());
            let s = pr.solve_state_detailed(&u, None).unwrap();
            assert!(s.y.values().iter().all(|&v| v == 0.0));
            assert!(s.iterations <= 1);
        }
    }

    #[test]
    fn bounds_validation() {
        assert!(Bounds::constant(1.0, 1.0).is_err());
        assert!(Bounds::constant(2.0, 1.0).is_err());
        assert!(Bounds::constant(f64::NAN, 1.0).is_err());
        let b = Bounds::constant(-5.0, 18.0).unwrap();
        assert!(b.is_constant());
        assert_eq!(b.min_gap(10), 23.0);
        assert!(Bounds::new(
            BoundValue::Nodal(NodalField::from_values(vec![0.0, 2.0])),
            BoundValue::Constant(1.0)
        )
        .is_err());
    }

    #[test]
    fn spec_validation() {
        let y = NodalField::zeros(4);
        assert!(ProblemSpec::new(Family::Denoising, -1.0, y.clone(), Bounds::inactive()).is_err());
        assert!(ProblemSpec::new(Family::Denoising, 1.0, NodalField::constant(4, f64::NAN), Bounds::inactive()).is_err());
        let mesh = Arc::new(Mesh::new(Rect::unit_symmetric(), 2, 2).unwrap());
        let spec = ProblemSpec::new(Family::Denoising, 1.0, y, Bounds::inactive()).unwrap();
        assert!(ControlProblem::new(mesh, spec).is_err());
    }

    #[test]
    fn state_and_adjoint_vanish_on_boundary() {
        for fam in [Family::LinearTracking, Family::SemilinearTracking] {
            let pr = problem(fam, 8);
            let u = pr.mesh().interpolate(|x, y| 5.0 * (3.0 * x).sin() + y);
            let t = pr.triple(&u).unwrap();
            for i in 0..u.len() {
                if pr.mesh().is_boundary(i) {
                    assert_eq!(t.y[i], 0.0);
                    assert_eq!(t.p[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn semilinear_state_residual_below_tolerance() {
        let pr = problem(Family::SemilinearTracking, 10);
        let u = pr.mesh().interpolate(|x, y| 40.0 * (1.0 - x * x) * (1.0 - y * y));
        let s = pr.solve_state_detailed(&u, None).unwrap();
        assert!(s.residual <= STATE_TOL);
        assert!(s.iterations >= 1);
        let warm = pr.solve_state_detailed(&u, Some(&s.y)).unwrap();
        assert_eq!(warm.iterations, 0);
    }

    #[test]
    fn adjoint_of_matching_state_is_zero() {
        let pr = problem(Family::LinearTracking, 6);
        let u = pr.mesh().interpolate(|x, _| x);
        let y = pr.solve_state(&u).unwrap();
        let spec = ProblemSpec::new(Family::LinearTracking, 1e-4, y.clone(), Bounds::inactive()).unwrap();
        let pr2 = ControlProblem::new(pr.mesh().clone(), spec).unwrap();
        assert!(pr2.solve_adjoint(&y).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn semilinear_adjoint_at_zero_state_equals_linear() {
        let lin = problem(Family::LinearTracking, 7);
        let semi = problem(Family::SemilinearTracking, 7);
        let y = NodalField::zeros(lin.mesh().n_nodes());
        let a = lin.solve_adjoint(&y).unwrap();
        let b = semi.solve_adjoint(&y).unwrap();
        for i in 0..a.len() {
            assert!((a[i] - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn semilinear_hessian_terms_vanish_at_zero() {
        let pr = problem(Family::SemilinearTracking, 4);
        let z = NodalField::zeros(pr.mesh().n_nodes());
        let t = StateTriple { y: z.clone(), p: z.clone(), u: z };
        let h = pr.hessian_terms(&t);
        assert!(h.reaction.iter().chain(&h.cross).all(|&v| v == 0.0));
        assert!(h.coupled);
    }

    #[test]
    fn denoising_gradient_vanishes_at_target() {
        let pr = problem(Family::Denoising, 5);
        let t = pr.triple(&pr.spec().y_d.clone()).unwrap();
        assert!(pr.reduced_gradient(&t).max_abs() == 0.0);
        assert!(t.p.max_abs() == 0.0);
    }

    #[test]
    fn linearized_gradient_at_expansion_point() {
        let pr = problem(Family::LinearTracking, 6);
        let u_bar = pr.mesh().interpolate(|x, y| x - 2.0 * y);
        let spec = pr.linearized_objective(&u_bar).unwrap();
        let lp = ControlProblem::new(pr.mesh().clone(), spec).unwrap();
        let t = lp.triple(&u_bar).unwrap();
        let g = lp.reduced_gradient(&t);
        let g0 = pr.reduced_gradient(&pr.triple(&u_bar).unwrap());
        assert_eq!(g, g0);
    }

    #[test]
    fn target_indicator_excludes_square_edge() {
        let mesh = Mesh::new(Rect::unit_symmetric(), 4, 4).unwrap();
        let t = square_indicator_target(&mesh);
        // only the center node lies strictly inside; ±0.5 is on the edge
        let inside = t.values().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(inside, 1);
        let mesh = Mesh::new(Rect::unit_symmetric(), 8, 8).unwrap();
        let t = square_indicator_target(&mesh);
        assert_eq!(t.values().iter().filter(|&&v| v == 1.0).count(), 9);
    }
}
