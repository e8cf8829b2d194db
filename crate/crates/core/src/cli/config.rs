//! Experiment configuration files (TOML).
//!
//! Every key is optional; omitted keys take the defaults of the linear
//! tracking experiment on `[-1, 1]²`:
//!
//! ```toml
//! [problem]
//! family = "linear"          # "linear" | "semilinear" | "denoising"
//! beta = 1e-4
//! target = "square"          # "square", a number or a formula in x1, x2
//! lower = -10.0              # a finite number or a formula
//! upper = 10.0
//!
//! [mesh]
//! nx = 128
//! ny = 128
//! rect = { xmin = -1.0, xmax = 1.0, ymin = -1.0, ymax = 1.0 }
//!
//! [continuation]             # eps0, eps_factor, rho0, rho_factor,
//!                            # tol_r_rho, tol_r_eps, max_outer
//! [newton]                   # eta, p_exp, phi, tau, step_tol,
//!                            # max_iter, max_linesearch
//! [output]
//! dir = "output"
//! fields = true
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use crate::continuation::ContinuationConfig;
use crate::error::{invalid, Result};
use crate::grid_fem::{Mesh, NodalField, Rect};
use crate::newton::NewtonConfig;
use crate::problem::{square_indicator_target, BoundValue, Bounds, ControlProblem, Family, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Linear,
    Semilinear,
    Denoising,
}

/// A scalar field given as a number or a formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Value(f64),
    Formula(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub family: FamilyName,
    pub beta: f64,
    pub target: FieldSpec,
    pub lower: FieldSpec,
    pub upper: FieldSpec,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            family: FamilyName::Linear,
            beta: 1e-4,
            target: FieldSpec::Formula("square".into()),
            lower: FieldSpec::Value(-10.0),
            upper: FieldSpec::Value(10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
    pub rect: Rect,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            nx: 128,
            ny: 128,
            rect: Rect::unit_symmetric(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "output".into(),
            fields: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub mesh: MeshConfig,
    pub continuation: ContinuationConfig,
    pub newton: NewtonConfig,
    pub output: OutputConfig,
}

/// Configuration errors carry a human-readable location.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks everything that does not need the mesh.
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let p = &self.problem;
        if !(p.beta >= 0.0 && p.beta.is_finite()) {
            return Err(ConfigError(format!("problem.beta must be finite and nonnegative, got {}", p.beta)));
        }
        for (name, f) in [("target", &p.target), ("lower", &p.lower), ("upper", &p.upper)] {
            match f {
                FieldSpec::Value(v) if !v.is_finite() => {
                    return Err(ConfigError(format!(
                        "problem.{name}: bounds and targets must be finite numbers or formulas, got {v}"
                    )))
                }
                FieldSpec::Formula(s) if !(name == "target" && s == "square") => {
                    Expr::parse(s).map_err(|e| ConfigError(format!("problem.{name} = \"{s}\": {e}")))?;
                }
                _ => {}
            }
        }
        if self.mesh.nx == 0 || self.mesh.ny == 0 {
            return Err(ConfigError("mesh.nx and mesh.ny must be positive".into()));
        }
        self.continuation
            .validate()
            .map_err(|e| ConfigError(format!("continuation: {e}")))?;
        self.newton.validate().map_err(|e| ConfigError(format!("newton: {e}")))?;
        Ok(())
    }

    pub fn family(&self) -> Family {
        match self.problem.family {
            FamilyName::Linear => Family::LinearTracking,
            FamilyName::Semilinear => Family::SemilinearTracking,
            FamilyName::Denoising => Family::Denoising,
        }
    }

    /// The same experiment on an `n × n` mesh.
    pub fn with_mesh(&self, nx: usize, ny: usize) -> Self {
        let mut c = self.clone();
        c.mesh.nx = nx;
        c.mesh.ny = ny;
        c
    }

    pub fn build_mesh(&self) -> Result<Arc<Mesh>> {
        Ok(Arc::new(Mesh::new(self.mesh.rect, self.mesh.nx, self.mesh.ny)?))
    }

    pub fn build_problem(&self) -> Result<ControlProblem> {
        let mesh = self.build_mesh()?;
        let y_d = match &self.problem.target {
            FieldSpec::Formula(s) if s == "square" => square_indicator_target(&mesh),
            f => nodal_field(&mesh, f, "target")?,
        };
        let bound = |f: &FieldSpec, name: &str| -> Result<BoundValue> {
            Ok(match f {
                FieldSpec::Value(v) => BoundValue::Constant(*v),
                FieldSpec::Formula(_) => BoundValue::Nodal(nodal_field(&mesh, f, name)?),
            })
        };
        let bounds = Bounds::new(bound(&self.problem.lower, "lower")?, bound(&self.problem.upper, "upper")?)?;
        let spec = ProblemSpec::new(self.family(), self.problem.beta, y_d, bounds)?;
        ControlProblem::new(mesh, spec)
    }
}

fn nodal_field(mesh: &Mesh, f: &FieldSpec, name: &str) -> Result<NodalField> {
    let field = match f {
        FieldSpec::Value(v) => NodalField::constant(mesh.n_nodes(), *v),
        FieldSpec::Formula(s) => {
            let e = Expr::parse(s).map_err(|e| invalid(format!("problem.{name}: {e}")))?;
            mesh.interpolate(|x, y| e.eval(x, y))
        }
    };
    if !field.is_finite() {
        return Err(invalid(format!("problem.{name} is not finite at every node")));
    }
    Ok(field)
}
