//! Smoothing and penalization continuation for non-convex optimization in
//! BV(Ω) with two-sided box constraints.
//!
//! The total-variation seminorm is replaced by the C² surrogate
//! `ψ_ε(t) = √(ε + |t|²) + ε|t|²`, the box constraints `u_a ≤ u ≤ u_b` by the
//! smoothed penalty `(1/ρ)·M_ρ`, and a sequence of penalized subproblems with
//! `ε → 0`, `ρ → ∞` is solved by a globalized Newton method. Everything is
//! discretized with P1 finite elements on a structured triangulation of a
//! rectangle.
//!
//! Module map:
//!
//! * [`grid_fem`]: mesh, sparse assembly, norms and field export.
//! * [`kernels`]: `ψ_ε`, `max_ρ`, `M_ρ` and the penalty multipliers.
//! * [`problem`]: state/adjoint solvers for the three problem families.
//! * [`objective`]: the penalized functional, its residual and Newton operator.
//! * [`newton`]: globalized Newton with Armijo backtracking.
//! * [`continuation`]: the outer `(ε, ρ)` loop and termination residuals.
//! * [`cli`]: configuration, reporting and the invariant suite behind the binary.

pub mod cli;
pub mod continuation;
pub mod error;
pub mod grid_fem;
pub mod kernels;
pub mod linalg;
pub mod newton;
pub mod objective;
pub mod problem;

pub use error::{Error, Result};
