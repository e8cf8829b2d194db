//! The penalized functional
//!
//! ```text
//! j(u) = f(u) + β ∫ ψ_ε(∇u) + ∫ (1/ρ) (M_ρ(ρ(u_a − u)) + M_ρ(ρ(u − u_b)))
//! ```
//!
//! with its first-order residual `F(y, p, u)` and Newton operator `G`.
//! The TV term is integrated exactly per element (∇u is constant there); the
//! penalty term uses vertex quadrature, so `λᵃ`, `λᵇ` are nodal.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::grid_fem::{
    assemble_weighted_stiffness, element_gradient_unchecked, lumped_inner, ElementVectorField,
    Mesh, NodalField,
};
use crate::kernels::{lambda_a, lambda_b, MaxRho, Psi};
use crate::linalg::TripletMatrix;
use crate::problem::{Bounds, ControlProblem, StateTriple};

/// Smoothing and penalty parameters of one subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenalizedParams {
    pub epsilon: f64,
    pub rho: f64,
}

impl PenalizedParams {
    pub fn new(epsilon: f64, rho: f64) -> Result<Self> {
        Psi::new(epsilon)?;
        MaxRho::new(rho)?;
        Ok(PenalizedParams { epsilon, rho })
    }
}

/// Value of `j` split into its three parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JParts {
    pub smooth: f64,
    pub tv: f64,
    pub penalty: f64,
}

impl JParts {
    pub fn total(&self) -> f64 {
        self.smooth + self.tv + self.penalty
    }
}

/// Weak residuals of the optimality system. `r_y` and `r_p` vanish on the
/// boundary nodes (eliminated rows).
#[derive(Debug, Clone, PartialEq)]
pub struct KktResidual {
    pub r_y: NodalField,
    pub r_p: NodalField,
    pub r_u: NodalField,
}

impl KktResidual {
    /// Stacks the residual in the unknown ordering of [`NewtonOperator`].
    pub fn stacked(&self, problem: &ControlProblem) -> Vec<f64> {
        let mut out = Vec::new();
        if problem.spec().family.has_pde() {
            out.extend(problem.interior().iter().map(|&i| self.r_y[i]));
            out.extend(problem.interior().iter().map(|&i| self.r_p[i]));
        }
        out.extend_from_slice(self.r_u.values());
        out
    }

    /// `√(‖r_y‖² + ‖r_p‖² + ‖r_u‖²)` in the lumped L² dual norm.
    pub fn dual_norm(&self, mesh: &Mesh) -> f64 {
        let ml = mesh.lumped_mass();
        let mut s = 0.0;
        for r in [&self.r_y, &self.r_p, &self.r_u] {
            for (v, m) in r.values().iter().zip(ml) {
                s += v * v / m;
            }
        }
        s.sqrt()
    }
}

/// Linearization of `F` as a sparse operator on the stacked unknowns
/// `(δy_I, δp_I, δu)`; families without a PDE constraint only carry `δu`.
pub struct NewtonOperator {
    matrix: TripletMatrix,
    n_state: usize,
    n_control: usize,
    control_block: Range<usize>,
}

impl NewtonOperator {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Number of interior unknowns in each of the `δy`, `δp` blocks.
    pub fn state_dim(&self) -> usize {
        self.n_state
    }

    pub fn control_dim(&self) -> usize {
        self.n_control
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.matvec(x)
    }

    pub fn matrix(&self) -> &TripletMatrix {
        &self.matrix
    }

    /// Multiplies the curvature entries of the `(u, u)` block (TV and
    /// penalty second derivatives plus, for families without a PDE, the
    /// mass term) by `s`.
    pub fn scale_control_block(&mut self, s: f64) {
        let range = self.control_block.clone();
        let rebuilt = {
            let mut m = TripletMatrix::new(self.matrix.dim());
            for (k, t) in self.matrix.entries().iter().enumerate() {
                let v = if range.contains(&k) { s * t.val } else { t.val };
                m.push(t.row, t.col, v);
            }
            m
        };
        self.matrix = rebuilt;
    }
}

/// The penalized functional of one `(ε, ρ)` subproblem.
pub struct PenalizedObjective<'a> {
    problem: &'a ControlProblem,
    params: PenalizedParams,
    psi: Psi,
    max_rho: MaxRho,
}

impl<'a> PenalizedObjective<'a> {
    pub fn new(problem: &'a ControlProblem, params: PenalizedParams) -> Result<Self> {
        Ok(PenalizedObjective {
            problem,
            params,
            psi: Psi::new(params.epsilon)?,
            max_rho: MaxRho::new(params.rho)?,
        })
    }

    pub fn problem(&self) -> &'a ControlProblem {
        self.problem
    }

    pub fn params(&self) -> PenalizedParams {
        self.params
    }

    fn mesh(&self) -> &Mesh {
        self.problem.mesh()
    }

    fn bounds(&self) -> &Bounds {
        &self.problem.spec().bounds
    }

    fn beta(&self) -> f64 {
        self.problem.spec().beta
    }

    /// `β ∫ ψ_ε(∇u)`.
    pub fn tv_value(&self, u: &NodalField) -> f64 {
        let grad = element_gradient_unchecked(self.mesh(), u.values());
        let s: f64 = grad
            .vectors()
            .iter()
            .zip(self.mesh().areas())
            .map(|(g, a)| a * self.psi.value(*g))
            .sum();
        self.beta() * s
    }

    /// `∫ (1/ρ)(M_ρ(ρ(u_a − u)) + M_ρ(ρ(u − u_b)))` with vertex quadrature.
    pub fn penalty_value(&self, u: &NodalField) -> f64 {
        let rho = self.params.rho;
        let b = self.bounds();
        u.values()
            .iter()
            .zip(self.mesh().lumped_mass())
            .enumerate()
            .map(|(i, (&v, m))| {
                m / rho
                    * (self.max_rho.antiderivative(rho * (b.lower_at(i) - v))
                        + self.max_rho.antiderivative(rho * (v - b.upper_at(i))))
            })
            .sum()
    }

    pub fn eval_parts(&self, u: &NodalField, y: &NodalField) -> JParts {
        JParts {
            smooth: self.problem.smooth_value(u, y),
            tv: self.tv_value(u),
            penalty: self.penalty_value(u),
        }
    }

    /// `j(u)`, solving the state equation.
    pub fn eval_j(&self, u: &NodalField) -> Result<f64> {
        let y = self.problem.solve_state(u)?;
        Ok(self.eval_parts(u, &y).total())
    }

    /// `j(u1) − j(u0)` accumulated term by term, so that small differences
    /// are not lost against the magnitude of `j`.
    pub fn j_difference(&self, u0: &NodalField, y0: &NodalField, u1: &NodalField, y1: &NodalField) -> f64 {
        let mesh = self.mesh();
        let smooth = self.problem.smooth_difference(u0, y0, u1, y1);
        let g0 = element_gradient_unchecked(mesh, u0.values());
        let g1 = element_gradient_unchecked(mesh, u1.values());
        let tv: f64 = g0
            .vectors()
            .iter()
            .zip(g1.vectors())
            .zip(mesh.areas())
            .map(|((a, b), area)| area * self.psi.difference(*b, *a))
            .sum();
        let rho = self.params.rho;
        let bounds = self.bounds();
        let m = &self.max_rho;
        let penalty: f64 = (0..u0.len())
            .map(|i| {
                let (lo, hi) = (bounds.lower_at(i), bounds.upper_at(i));
                let d = m.antiderivative(rho * (lo - u1[i])) - m.antiderivative(rho * (lo - u0[i]))
                    + m.antiderivative(rho * (u1[i] - hi))
                    - m.antiderivative(rho * (u0[i] - hi));
                mesh.lumped_mass()[i] / rho * d
            })
            .sum();
        smooth + self.beta() * tv + penalty
    }

    /// `β Σ_T |T| ψ'_ε(∇u_T)·∇φ_i`.
    pub fn tv_gradient_dual(&self, u: &NodalField) -> Vec<f64> {
        let mesh = self.mesh();
        let grad = element_gradient_unchecked(mesh, u.values());
        let mut out = vec![0.0; mesh.n_nodes()];
        for (((tri, gb), &area), g) in mesh
            .triangles()
            .iter()
            .zip(mesh.grad_basis())
            .zip(mesh.areas())
            .zip(grad.vectors())
        {
            let d = self.psi.grad(*g);
            for a in 0..3 {
                out[tri[a]] += self.beta() * area * (d[0] * gb[a][0] + d[1] * gb[a][1]);
            }
        }
        out
    }

    /// `m_i (λᵇ_i − λᵃ_i)`.
    pub fn penalty_gradient_dual(&self, u: &NodalField) -> Vec<f64> {
        let rho = self.params.rho;
        let b = self.bounds();
        u.values()
            .iter()
            .zip(self.mesh().lumped_mass())
            .enumerate()
            .map(|(i, (&v, m))| {
                m * (self.max_rho.value(rho * (v - b.upper_at(i)))
                    - self.max_rho.value(rho * (b.lower_at(i) - v)))
            })
            .collect()
    }

    /// Discrete gradient of `j` with respect to the nodal coefficients.
    pub fn gradient_dual(&self, triple: &StateTriple) -> Vec<f64> {
        let mut g = self.problem.reduced_gradient_dual(triple);
        for (a, b) in g.iter_mut().zip(self.tv_gradient_dual(&triple.u)) {
            *a += b;
        }
        for (a, b) in g.iter_mut().zip(self.penalty_gradient_dual(&triple.u)) {
            *a += b;
        }
        g
    }

    /// L² Riesz representative of `∇j` through the lumped mass matrix.
    pub fn gradient_riesz(&self, triple: &StateTriple) -> NodalField {
        let g = self.gradient_dual(triple);
        NodalField::from_values(
            g.iter()
                .zip(self.mesh().lumped_mass())
                .map(|(v, m)| v / m)
                .collect(),
        )
    }

    pub fn lambda_a(&self, u: &NodalField) -> Result<NodalField> {
        lambda_a(self.params.rho, u, self.bounds())
    }

    pub fn lambda_b(&self, u: &NodalField) -> Result<NodalField> {
        lambda_b(self.params.rho, u, self.bounds())
    }

    /// Weak residual `F(y, p, u)`.
    pub fn assemble_f(&self, triple: &StateTriple) -> Result<KktResidual> {
        let mesh = self.mesh();
        for (f, what) in [(&triple.y, "y"), (&triple.p, "p"), (&triple.u, "u")] {
            mesh.check_nodal(f, what)?;
        }
        let pr = self.problem;
        let n = mesh.n_nodes();
        let r_u = NodalField::from_values(self.gradient_dual(triple));
        if !pr.spec().family.has_pde() {
            let r_y = triple.y.sub(&pr.solve_state(&triple.u)?);
            let r_p = triple.p.sub(&pr.solve_adjoint(&triple.y)?);
            return Ok(KktResidual { r_y, r_p, r_u });
        }
        let terms = pr.hessian_terms(triple);
        let ml = mesh.lumped_mass();
        let ky = pr.stiffness().matvec(triple.y.values());
        let mu = pr.mass().matvec(triple.u.values());
        let kp = pr.stiffness().matvec(triple.p.values());
        let md = pr.mass().matvec(triple.y.sub(&pr.spec().y_d).values());
        let semilinear = matches!(pr.spec().family, crate::problem::Family::SemilinearTracking);
        let mut r_y = NodalField::zeros(n);
        let mut r_p = NodalField::zeros(n);
        for &i in pr.interior() {
            let y = triple.y[i];
            let cubic = if semilinear { ml[i] * y * y * y } else { 0.0 };
            r_y[i] = ky[i] + cubic - mu[i];
            r_p[i] = kp[i] + ml[i] * terms.reaction[i] * triple.p[i] - md[i];
        }
        Ok(KktResidual { r_y, r_p, r_u })
    }

    /// Newton operator `G(y, p, u)`, the derivative of [`Self::assemble_f`].
    pub fn assemble_g(&self, triple: &StateTriple) -> Result<NewtonOperator> {
        let mesh = self.mesh();
        for (f, what) in [(&triple.y, "y"), (&triple.p, "p"), (&triple.u, "u")] {
            mesh.check_nodal(f, what)?;
        }
        let pr = self.problem;
        let n = mesh.n_nodes();
        let ml = mesh.lumped_mass();
        let coupled = pr.spec().family.has_pde();
        let ns = if coupled { pr.interior().len() } else { 0 };
        let off_u = 2 * ns;
        let mut g = TripletMatrix::new(off_u + n);

        if coupled {
            let terms = pr.hessian_terms(triple);
            let interior_map = pr.interior_map();
            let all = pr.identity_map();
            let react: Vec<f64> = pr.interior().iter().map(|&i| ml[i] * terms.reaction[i]).collect();
            let cross: Vec<f64> = pr.interior().iter().map(|&i| ml[i] * terms.cross[i]).collect();
            // state rows: B δy − M δu
            g.add_block(pr.stiffness(), interior_map, interior_map, 0, 0, 1.0);
            g.add_diagonal(0, &react);
            g.add_block(pr.mass(), interior_map, all, 0, off_u, -1.0);
            // adjoint rows: (6yp M_L − M) δy + B δp
            g.add_block(pr.mass(), interior_map, interior_map, ns, 0, -1.0);
            g.add_diagonal_at(ns, 0, &cross);
            g.add_block(pr.stiffness(), interior_map, interior_map, ns, ns, 1.0);
            g.add_diagonal(ns, &react);
            // control rows: M δp + H_uu δu
            g.add_block(pr.mass(), all, interior_map, off_u, ns, 1.0);
        }

        let start = g.entries().len();
        if !coupled {
            g.add_block(pr.mass(), pr.identity_map(), pr.identity_map(), 0, 0, 1.0);
        }
        let grad = element_gradient_unchecked(mesh, triple.u.values());
        let beta = self.beta();
        let weights: Vec<[[f64; 2]; 2]> = grad
            .vectors()
            .iter()
            .map(|t| {
                let h = self.psi.hess(*t);
                [[beta * h[0][0], beta * h[0][1]], [beta * h[1][0], beta * h[1][1]]]
            })
            .collect();
        let tv_hess = assemble_weighted_stiffness(mesh, &weights);
        g.add_block(&tv_hess, pr.identity_map(), pr.identity_map(), off_u, off_u, 1.0);
        let rho = self.params.rho;
        let b = self.bounds();
        let pen: Vec<f64> = (0..n)
            .map(|i| {
                let u = triple.u[i];
                // ρ (Λᵇ − Λᵃ) m_i
                rho * ml[i]
                    * (self.max_rho.prime(rho * (u - b.upper_at(i)))
                        + self.max_rho.prime(rho * (b.lower_at(i) - u)))
            })
            .collect();
        g.add_diagonal(off_u, &pen);
        let end = g.entries().len();

        Ok(NewtonOperator {
            matrix: g,
            n_state: ns,
            n_control: n,
            control_block: start..end,
        })
    }

    /// Splits a stacked Newton update into nodal `(δy, δp, δu)`.
    pub fn unstack(&self, x: &[f64], ns: usize) -> (NodalField, NodalField, NodalField) {
        let pr = self.problem;
        let n = self.mesh().n_nodes();
        let mut dy = NodalField::zeros(n);
        let mut dp = NodalField::zeros(n);
        if ns > 0 {
            for (k, &i) in pr.interior().iter().enumerate() {
                dy[i] = x[k];
                dp[i] = x[ns + k];
            }
        }
        let du = NodalField::from_values(x[2 * ns..].to_vec());
        (dy, dp, du)
    }
}

/// `μ = ∇u / √(ε + |∇u|²)` per element.
pub fn tv_dual_proxy(mesh: &Mesh, eps: f64, u: &NodalField) -> Result<ElementVectorField> {
    mesh.check_nodal(u, "tv_dual_proxy")?;
    Psi::new(eps)?;
    let grad = element_gradient_unchecked(mesh, u.values());
    Ok(ElementVectorField::from_vectors(
        grad.vectors()
            .iter()
            .map(|g| {
                let s = (eps + g[0] * g[0] + g[1] * g[1]).sqrt();
                [g[0] / s, g[1] / s]
            })
            .collect(),
    ))
}

/// `R^ε = ‖∇u‖_{L¹} − ⟨μ, ∇u⟩` with `μ = ∇u/√(ε + |∇u|²)`.
pub fn residual_r_eps(mesh: &Mesh, eps: f64, u: &NodalField) -> Result<f64> {
    mesh.check_nodal(u, "residual_r_eps")?;
    Psi::new(eps)?;
    let grad = element_gradient_unchecked(mesh, u.values());
    // per element |g| − |g|²/s = |g| ε / (s (s + |g|)), free of cancellation
    Ok(grad
        .vectors()
        .iter()
        .zip(mesh.areas())
        .map(|(g, area)| {
            let n = g[0].hypot(g[1]);
            let s = (eps + n * n).sqrt();
            area * n * eps / (s * (s + n))
        })
        .sum())
}

/// `R^ρ = ‖(u_a − u)₊‖ + ‖(u − u_b)₊‖ + (λᵃ, u_a − u) + (λᵇ, u − u_b)`
/// with lumped-mass norms and pairings.
pub fn residual_r_rho(mesh: &Mesh, rho: f64, u: &NodalField, bounds: &Bounds) -> Result<f64> {
    mesh.check_nodal(u, "residual_r_rho")?;
    let la = lambda_a(rho, u, bounds)?;
    let lb = lambda_b(rho, u, bounds)?;
    let ml = mesh.lumped_mass();
    let (mut va, mut vb, mut pair) = (0.0, 0.0, 0.0);
    for i in 0..u.len() {
        let da = bounds.lower_at(i) - u[i];
        let db = u[i] - bounds.upper_at(i);
        va += ml[i] * da.max(0.0).powi(2);
        vb += ml[i] * db.max(0.0).powi(2);
        // skip inactive nodes so infinite bounds do not produce 0·∞
        if la[i] != 0.0 {
            pair += ml[i] * la[i] * da;
        }
        if lb[i] != 0.0 {
            pair += ml[i] * lb[i] * db;
        }
    }
    Ok(va.sqrt() + vb.sqrt() + pair)
}

/// `‖(u − u_b)₊‖ + ‖(u_a − u)₊‖` with the lumped mass.
pub fn constraint_violation(mesh: &Mesh, u: &NodalField, bounds: &Bounds) -> f64 {
    let pos_a = NodalField::from_values((0..u.len()).map(|i| (bounds.lower_at(i) - u[i]).max(0.0)).collect());
    let pos_b = NodalField::from_values((0..u.len()).map(|i| (u[i] - bounds.upper_at(i)).max(0.0)).collect());
    lumped_inner(mesh, pos_a.values(), pos_a.values()).sqrt()
        + lumped_inner(mesh, pos_b.values(), pos_b.values()).sqrt()
}

pub(crate) fn linear_solve_error(e: Error) -> Error {
    match e {
        Error::LinearSolve(m) => Error::SolverFailure {
            message: format!("Newton system: {m}"),
            residual: f64::NAN,
        },
        other => other,
    }
}
