//! Structured P1 finite elements on an axis-aligned rectangle.

mod assembly;
mod export;
mod mesh;
mod norms;
mod sparse;

pub use assembly::{
    assemble_mass, assemble_stiffness, assemble_weighted_stiffness, divergence_load,
    element_gradient,
};
pub(crate) use assembly::element_gradient_unchecked;
pub use export::{fmt17, read_field_text, write_field_csv, write_field_text};
pub use mesh::{CsrPattern, ElementVectorField, Mesh, NodalField, Rect};
pub use norms::{grad_l1, l2_inner, l2_norm, lumped_inner, lumped_l2_norm, norms, Norms};
pub use sparse::CsrMatrix;
