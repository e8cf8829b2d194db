//! Pointwise kernels of the smoothed and penalized functional.
//!
//! * `ψ_ε(t) = √(ε + |t|²) + ε|t|²` on ℝ², a C² convex surrogate of `|t|`,
//! * `max_ρ`, the C¹ smoothing of `max(0, ·)` on `|x| ≤ 1/(2ρ)`,
//! * `M_ρ`, the antiderivative of `max_ρ` (the C² penalty integrand),
//! * the multipliers `λᵃ = max_ρ(ρ(u_a − u))`, `λᵇ = max_ρ(ρ(u − u_b))` and
//!   their Newton weights `Λᵃ = −max_ρ'(ρ(u_a − u))`, `Λᵇ = max_ρ'(ρ(u − u_b))`.
//!
//! At the break points `|x| = 1/(2ρ)` the quadratic branch is used.

use crate::error::{invalid, Result};
use crate::grid_fem::NodalField;
use crate::problem::Bounds;

/// The smoothing `ψ_ε` for a fixed `ε > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Psi {
    eps: f64,
}

impl Psi {
    pub fn new(eps: f64) -> Result<Psi> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid(format!("epsilon must be positive, got {eps}")));
        }
        Ok(Psi { eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn value(&self, t: [f64; 2]) -> f64 {
        let t2 = t[0] * t[0] + t[1] * t[1];
        (self.eps + t2).sqrt() + self.eps * t2
    }

    pub fn grad(&self, t: [f64; 2]) -> [f64; 2] {
        let s = (self.eps + t[0] * t[0] + t[1] * t[1]).sqrt();
        let c = 1.0 / s + 2.0 * self.eps;
        [c * t[0], c * t[1]]
    }

    pub fn hess(&self, t: [f64; 2]) -> [[f64; 2]; 2] {
        let r = self.eps + t[0] * t[0] + t[1] * t[1];
        let s = r.sqrt();
        let d = 1.0 / s + 2.0 * self.eps;
        let c = 1.0 / (r * s);
        let off = -c * t[0] * t[1];
        [[d - c * t[0] * t[0], off], [off, d - c * t[1] * t[1]]]
    }

    /// `ψ_ε(a) − ψ_ε(b)` without cancellation when `a ≈ b`.
    pub fn difference(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let a2 = a[0] * a[0] + a[1] * a[1];
        let b2 = b[0] * b[0] + b[1] * b[1];
        // |a|² − |b|² = (a − b)·(a + b)
        let d2 = (a[0] - b[0]) * (a[0] + b[0]) + (a[1] - b[1]) * (a[1] + b[1]);
        d2 / ((self.eps + a2).sqrt() + (self.eps + b2).sqrt()) + self.eps * d2
    }
}

/// The smoothed positive part `max_ρ` and its antiderivative `M_ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxRho {
    rho: f64,
    half: f64,
}

impl MaxRho {
    pub fn new(rho: f64) -> Result<MaxRho> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid(format!("rho must be positive, got {rho}")));
        }
        Ok(MaxRho {
            rho,
            half: 0.5 / rho,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn value(&self, x: f64) -> f64 {
        if x.abs() > self.half {
            x.max(0.0)
        } else {
            let s = x + self.half;
            0.5 * self.rho * s * s
        }
    }

    pub fn prime(&self, x: f64) -> f64 {
        if x > self.half {
            1.0
        } else if x < -self.half {
            0.0
        } else {
            self.rho * (x + self.half)
        }
    }

    /// `M_ρ(x) = ∫_{−∞}^x max_ρ(t) dt`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        if x > self.half {
            0.5 * x * x + 1.0 / (24.0 * self.rho * self.rho)
        } else if x < -self.half {
            0.0
        } else {
            let s = x + self.half;
            self.rho / 6.0 * s * s * s
        }
    }
}

pub fn psi(eps: f64, t: [f64; 2]) -> Result<f64> {
    Ok(Psi::new(eps)?.value(t))
}

pub fn psi_grad(eps: f64, t: [f64; 2]) -> Result<[f64; 2]> {
    Ok(Psi::new(eps)?.grad(t))
}

pub fn psi_hess(eps: f64, t: [f64; 2]) -> Result<[[f64; 2]; 2]> {
    Ok(Psi::new(eps)?.hess(t))
}

pub fn max_rho(rho: f64, x: f64) -> Result<f64> {
    Ok(MaxRho::new(rho)?.value(x))
}

pub fn max_rho_prime(rho: f64, x: f64) -> Result<f64> {
    Ok(MaxRho::new(rho)?.prime(x))
}

pub fn m_rho(rho: f64, x: f64) -> Result<f64> {
    Ok(MaxRho::new(rho)?.antiderivative(x))
}

fn nodal_map(
    rho: f64,
    u: &NodalField,
    bounds: &Bounds,
    f: impl Fn(&MaxRho, f64, f64, f64) -> f64,
) -> Result<NodalField> {
    let m = MaxRho::new(rho)?;
    bounds.check_len(u.len())?;
    Ok(NodalField::from_values(
        (0..u.len())
            .map(|i| f(&m, u[i], bounds.lower_at(i), bounds.upper_at(i)))
            .collect(),
    ))
}

/// `λᵃ = max_ρ(ρ(u_a − u))` at every node.
pub fn lambda_a(rho: f64, u: &NodalField, bounds: &Bounds) -> Result<NodalField> {
    nodal_map(rho, u, bounds, |m, u, a, _| m.value(m.rho * (a - u)))
}

/// `λᵇ = max_ρ(ρ(u − u_b))` at every node.
pub fn lambda_b(rho: f64, u: &NodalField, bounds: &Bounds) -> Result<NodalField> {
    nodal_map(rho, u, bounds, |m, u, _, b| m.value(m.rho * (u - b)))
}

/// `Λᵃ = −max_ρ'(ρ(u_a − u)) ∈ [−1, 0]`.
pub fn lambda_weight_a(rho: f64, u: &NodalField, bounds: &Bounds) -> Result<NodalField> {
    nodal_map(rho, u, bounds, |m, u, a, _| -m.prime(m.rho * (a - u)))
}

/// `Λᵇ = max_ρ'(ρ(u − u_b)) ∈ [0, 1]`.
pub fn lambda_weight_b(rho: f64, u: &NodalField, bounds: &Bounds) -> Result<NodalField> {
    nodal_map(rho, u, bounds, |m, u, _, b| m.prime(m.rho * (u - b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TIGHT: f64 = 1e-12;

    #[test]
    fn psi_closed_forms() {
        assert!((psi(0.25, [0.0, 0.0]).unwrap() - 0.5).abs() < TIGHT);
        let v = psi(0.25, [1.0, 0.0]).unwrap();
        assert!((v - (1.25f64.sqrt() + 0.25)).abs() < TIGHT);
        assert!((v - 1.368034).abs() < 1e-6);
        let g = psi_grad(0.25, [1.0, 0.0]).unwrap();
        assert!((g[0] - (1.0 / 1.25f64.sqrt() + 0.5)).abs() < TIGHT);
        assert!((g[0] - 1.394427).abs() < 1e-6);
        assert!(g[0] >= 1.0 - 0.5);
        assert!(psi(0.0, [1.0, 0.0]).is_err());
        assert!(psi_hess(-1.0, [1.0, 0.0]).is_err());
    }

    #[test]
    fn max_rho_closed_forms() {
        assert_eq!(max_rho(2.0, 1.0).unwrap(), 1.0);
        assert!((max_rho(2.0, 0.0).unwrap() - 0.0625).abs() < TIGHT);
        for rho in [0.3, 1.0, 2.0, 1e3, 2f64.powi(19)] {
            assert!((max_rho_prime(rho, 0.0).unwrap() - 0.5).abs() < TIGHT);
        }
        assert!(max_rho(0.0, 1.0).is_err());
        assert!(max_rho_prime(-2.0, 1.0).is_err());
    }

    #[test]
    fn m_rho_closed_forms() {
        assert_eq!(m_rho(2.0, -1.0).unwrap(), 0.0);
        assert!((m_rho(2.0, 0.5).unwrap() - (0.125 + 1.0 / 96.0)).abs() < TIGHT);
        assert!((m_rho(2.0, 0.0).unwrap() - 2.0 / 6.0 * 0.25f64.powi(3)).abs() < TIGHT);
        assert!(m_rho(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn m_rho_matches_quadrature_of_max_rho() {
        // composite Simpson from far left of the support
        let m = MaxRho::new(2.0).unwrap();
        for x in [-0.1, 0.0, 0.2, 0.5, 1.7] {
            let a = -1.0;
            let n = 20_000;
            let h = (x - a) / n as f64;
            let mut s = m.value(a) + m.value(x);
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                s += w * m.value(a + k as f64 * h);
            }
            let integral = s * h / 3.0;
            assert!((integral - m.antiderivative(x)).abs() < 1e-9, "x = {x}");
        }
    }

    #[test]
    fn branch_continuity() {
        for rho in [0.5, 2.0, 37.0, 1024.0] {
            let m = MaxRho::new(rho).unwrap();
            for x0 in [0.5 / rho, -0.5 / rho] {
                let lo = x0 * (1.0 - 1e-15);
                let hi = x0 * (1.0 + 1e-15);
                assert!((m.value(lo) - m.value(hi)).abs() < TIGHT);
                assert!((m.prime(lo) - m.prime(hi)).abs() < TIGHT);
                assert!((m.antiderivative(lo) - m.antiderivative(hi)).abs() < TIGHT);
            }
        }
    }

    #[test]
    fn multipliers_on_nodes() {
        let bounds = Bounds::constant(-10.0, 10.0).unwrap();
        let u = NodalField::from_values(vec![-10.5, 0.0, 10.0, 30.0]);
        let la = lambda_a(4.0, &u, &bounds).unwrap();
        let lb = lambda_b(4.0, &u, &bounds).unwrap();
        assert_eq!(la[0], 2.0);
        assert_eq!(la[1], 0.0);
        assert_eq!(lb[1], 0.0);
        let wb = lambda_weight_b(4.0, &u, &bounds).unwrap();
        assert!((wb[2] - 0.5).abs() < TIGHT);
        assert_eq!(wb[3], 1.0);
        let wa = lambda_weight_a(4.0, &u, &bounds).unwrap();
        assert_eq!(wa[0], -1.0);
        assert_eq!(wa[1], 0.0);
        // disjoint supports once ρ² ≥ 1/(u_b − u_a)
        for i in 0..u.len() {
            assert_eq!(la[i] * lb[i], 0.0);
        }
        let mid = NodalField::constant(3, 0.0);
        assert!(lambda_a(1.0, &mid, &bounds).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(lambda_weight_a(1.0, &mid, &bounds).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn multipliers_reject_mismatched_nodal_bounds() {
        let bounds = Bounds::new(
            crate::problem::BoundValue::Nodal(NodalField::constant(3, -1.0)),
            crate::problem::BoundValue::Constant(1.0),
        )
        .unwrap();
        assert!(lambda_a(2.0, &NodalField::zeros(4), &bounds).is_err());
    }

    fn vec2() -> impl Strategy<Value = [f64; 2]> {
        (-50.0f64..50.0, -50.0f64..50.0).prop_map(|(a, b)| [a, b])
    }

    proptest! {
        #[test]
        fn psi_hessian_eigenvalues_at_least_two_eps(t in vec2(), eps in 1e-6f64..1.0) {
            let h = Psi::new(eps).unwrap().hess(t);
            prop_assert_eq!(h[0][1], h[1][0]);
            let tr = h[0][0] + h[1][1];
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
            let lmin = 0.5 * tr - disc;
            prop_assert!(lmin >= 2.0 * eps * (1.0 - 1e-9));
        }

        #[test]
        fn psi_lower_bounds(t in vec2(), eps in 1e-6f64..1.0) {
            let p = Psi::new(eps).unwrap();
            let n = t[0].hypot(t[1]);
            prop_assert!(p.value(t) >= n + eps * n * n);
            let g = p.grad(t);
            let gt = g[0] * t[0] + g[1] * t[1];
            prop_assert!(gt >= 0.0);
            prop_assert!(gt >= n - eps.sqrt() - 1e-12 * n);
        }

        #[test]
        fn psi_monotone_in_eps(t in vec2(), e1 in 1e-6f64..1.0, e2 in 1e-6f64..1.0) {
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(Psi::new(lo).unwrap().value(t) <= Psi::new(hi).unwrap().value(t));
        }

        #[test]
        fn psi_gradient_matches_central_differences(t in vec2(), eps in 1e-3f64..1.0) {
            let p = Psi::new(eps).unwrap();
            let g = p.grad(t);
            let h = 1e-6 * (1.0 + t[0].abs().max(t[1].abs()));
            for d in 0..2 {
                let mut tp = t;
                let mut tm = t;
                tp[d] += h;
                tm[d] -= h;
                let fd = (p.value(tp) - p.value(tm)) / (2.0 * h);
                prop_assert!((fd - g[d]).abs() <= 1e-6 * g[d].abs().max(1.0));
            }
        }

        #[test]
        fn psi_difference_is_consistent(a in vec2(), b in vec2(), eps in 1e-6f64..1.0) {
            let p = Psi::new(eps).unwrap();
            let direct = p.value(a) - p.value(b);
            prop_assert!((p.difference(a, b) - direct).abs() <= 1e-12 * (1.0 + p.value(a).abs()));
        }

        #[test]
        fn max_rho_envelope_and_derivative(x in -10.0f64..10.0, rho in 0.1f64..1e4) {
            let m = MaxRho::new(rho).unwrap();
            let v = m.value(x);
            prop_assert!(0.0 <= x.max(0.0));
            prop_assert!(x.max(0.0) <= v);
            prop_assert!(v <= x.max(0.0) + 0.5 / rho + 1e-15);
            let d = m.prime(x);
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!(m.prime(x + 0.01) >= d);
            prop_assert!(m.antiderivative(x) >= 0.5 * x.max(0.0).powi(2));
        }

        #[test]
        fn m_rho_derivative_is_max_rho(x in -3.0f64..3.0, rho in 0.5f64..50.0) {
            let m = MaxRho::new(rho).unwrap();
            let h = 1e-5;
            let fd = (m.antiderivative(x + h) - m.antiderivative(x - h)) / (2.0 * h);
            prop_assert!((fd - m.value(x)).abs() <= 1e-8 * (1.0 + m.value(x)));
        }

        #[test]
        fn max_rho_derivative_away_from_breaks(x in -3.0f64..3.0, rho in 0.5f64..50.0) {
            let m = MaxRho::new(rho).unwrap();
            let h = 1e-7;
            prop_assume!((x.abs() - 0.5 / rho).abs() > 10.0 * h);
            let fd = (m.value(x + h) - m.value(x - h)) / (2.0 * h);
            prop_assert!((fd - m.prime(x)).abs() <= 1e-6);
        }
    }
}
