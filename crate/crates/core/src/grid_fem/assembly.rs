use super::mesh::{Mesh, NodalField, ElementVectorField};
use super::sparse::CsrMatrix;
use crate::error::Result;

/// Consistent P1 mass matrix.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    let mut m = CsrMatrix::zeros_like_pattern(mesh.pattern());
    let values = m.values_mut();
    for (slots, &area) in mesh.element_slots().iter().zip(mesh.areas()) {
        for a in 0..3 {
            for b in 0..3 {
                let w = if a == b { 2.0 } else { 1.0 };
                values[slots[3 * a + b]] += area * w / 12.0;
            }
        }
    }
    m
}

/// P1 stiffness matrix of `−Δ` without boundary conditions.
pub fn assemble_stiffness(mesh: &Mesh) -> CsrMatrix {
    let identity = vec![[[1.0, 0.0], [0.0, 1.0]]; mesh.n_triangles()];
    assemble_weighted_stiffness(mesh, &identity)
}

/// Stiffness matrix of `−div(A ∇·)` with one symmetric 2×2 tensor `A` per triangle.
pub fn assemble_weighted_stiffness(mesh: &Mesh, weights: &[[[f64; 2]; 2]]) -> CsrMatrix {
    assert_eq!(weights.len(), mesh.n_triangles());
    let mut k = CsrMatrix::zeros_like_pattern(mesh.pattern());
    let values = k.values_mut();
    for (((slots, &area), grads), w) in mesh
        .element_slots()
        .iter()
        .zip(mesh.areas())
        .zip(mesh.grad_basis())
        .zip(weights)
    {
        for a in 0..3 {
            let wa = [
                w[0][0] * grads[a][0] + w[0][1] * grads[a][1],
                w[1][0] * grads[a][0] + w[1][1] * grads[a][1],
            ];
            for b in 0..3 {
                values[slots[3 * a + b]] += area * (wa[0] * grads[b][0] + wa[1] * grads[b][1]);
            }
        }
    }
    k
}

/// Element-wise constant gradient of a P1 function.
pub fn element_gradient(mesh: &Mesh, u: &NodalField) -> Result<ElementVectorField> {
    mesh.check_nodal(u, "element_gradient")?;
    Ok(element_gradient_unchecked(mesh, u.values()))
}

pub(crate) fn element_gradient_unchecked(mesh: &Mesh, u: &[f64]) -> ElementVectorField {
    let vectors = mesh
        .triangles()
        .iter()
        .zip(mesh.grad_basis())
        .map(|(tri, g)| {
            let mut out = [0.0; 2];
            for a in 0..3 {
                out[0] += u[tri[a]] * g[a][0];
                out[1] += u[tri[a]] * g[a][1];
            }
            out
        })
        .collect();
    ElementVectorField::from_vectors(vectors)
}

/// Load vector `b_i = Σ_T |T| · v_T · ∇φ_i` of an element-wise constant vector
/// field, i.e. the weak form of `−div v`.
pub fn divergence_load(mesh: &Mesh, v: &ElementVectorField) -> Vec<f64> {
    assert_eq!(v.len(), mesh.n_triangles());
    let mut out = vec![0.0; mesh.n_nodes()];
    for (((tri, g), &area), vt) in mesh
        .triangles()
        .iter()
        .zip(mesh.grad_basis())
        .zip(mesh.areas())
        .zip(v.vectors())
    {
        for a in 0..3 {
            out[tri[a]] += area * (vt[0] * g[a][0] + vt[1] * g[a][1]);
        }
    }
    out
}
