use serde::Serialize;

use super::assembly::element_gradient_unchecked;
use super::mesh::{Mesh, NodalField};
use crate::error::Result;

/// Lebesgue norms of a P1 function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// L¹ (exact per element), L² (consistent mass) and L∞ (nodal max) norms.
pub fn norms(mesh: &Mesh, u: &NodalField) -> Result<Norms> {
    mesh.check_nodal(u, "norms")?;
    let v = u.values();
    let mut l1 = 0.0;
    for (tri, &area) in mesh.triangles().iter().zip(mesh.areas()) {
        l1 += abs_integral(area, [v[tri[0]], v[tri[1]], v[tri[2]]]);
    }
    Ok(Norms {
        l1,
        l2: l2_norm(mesh, v),
        linf: u.max_abs(),
    })
}

/// `‖∇u‖_{L¹} = Σ_T |T|·|∇u_T|`.
pub fn grad_l1(mesh: &Mesh, u: &NodalField) -> Result<f64> {
    mesh.check_nodal(u, "grad_l1")?;
    let grad = element_gradient_unchecked(mesh, u.values());
    Ok(grad
        .vectors()
        .iter()
        .zip(mesh.areas())
        .map(|(g, a)| a * g[0].hypot(g[1]))
        .sum())
}

/// L² norm with the consistent mass matrix, evaluated element by element.
pub fn l2_norm(mesh: &Mesh, v: &[f64]) -> f64 {
    l2_inner(mesh, v, v).max(0.0).sqrt()
}

/// L² inner product of two P1 functions (consistent mass).
pub fn l2_inner(mesh: &Mesh, a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (tri, &area) in mesh.triangles().iter().zip(mesh.areas()) {
        let [i, j, k] = *tri;
        let sa = a[i] + a[j] + a[k];
        let sb = b[i] + b[j] + b[k];
        let diag = a[i] * b[i] + a[j] * b[j] + a[k] * b[k];
        s += area / 12.0 * (diag + sa * sb);
    }
    s
}

/// L² norm under vertex quadrature (lumped mass).
pub fn lumped_l2_norm(mesh: &Mesh, v: &[f64]) -> f64 {
    lumped_inner(mesh, v, v).sqrt()
}

/// L² pairing under vertex quadrature (lumped mass).
pub fn lumped_inner(mesh: &Mesh, a: &[f64], b: &[f64]) -> f64 {
    mesh.lumped_mass()
        .iter()
        .zip(a.iter().zip(b))
        .map(|(m, (x, y))| m * x * y)
        .sum()
}

// ∫_T |l| for the affine l with vertex values `v`.
fn abs_integral(area: f64, v: [f64; 3]) -> f64 {
    let pos = v.iter().filter(|&&x| x > 0.0).count();
    let neg = v.iter().filter(|&&x| x < 0.0).count();
    let mean = (v[0] + v[1] + v[2]) / 3.0;
    if pos == 0 || neg == 0 {
        return area * mean.abs();
    }
    // exactly one vertex is on the minority side; flip so it is positive
    let sign = if pos == 1 { 1.0 } else { -1.0 };
    let w = v.map(|x| sign * x);
    let lone = (0..3).find(|&i| w[i] > 0.0).unwrap();
    let a = w[lone];
    let b = w[(lone + 1) % 3];
    let c = w[(lone + 2) % 3];
    let positive_part = area * a * a * a / (3.0 * (a - b) * (a - c));
    2.0 * positive_part - area * sign * mean
}
