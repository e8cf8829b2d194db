//! Test-side oracles written independently of the library internals.
#![allow(dead_code)]

use std::sync::Arc;

use bvpen::grid_fem::{Mesh, NodalField, Rect};
use bvpen::problem::{Bounds, ControlProblem, Family, ProblemSpec};

/// Nodes and triangles of an `n × n` grid on `[x0, x1]²`, row-major with
/// every cell split along its lower-left to upper-right diagonal.
pub struct OracleMesh {
    pub nodes: Vec<[f64; 2]>,
    pub tris: Vec<[usize; 3]>,
}

impl OracleMesh {
    pub fn new(x0: f64, x1: f64, n: usize) -> Self {
        let h = (x1 - x0) / n as f64;
        let mut nodes = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                nodes.push([x0 + i as f64 * h, x0 + j as f64 * h]);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut tris = Vec::new();
        for j in 0..n {
            for i in 0..n {
                tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        OracleMesh { nodes, tris }
    }

    /// Area and the three basis gradients of triangle `t`.
    pub fn geometry(&self, t: usize) -> (f64, [[f64; 2]; 3]) {
        let [a, b, c] = self.tris[t].map(|k| self.nodes[k]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let area = 0.5 * det.abs();
        // ∇φ_a = rot90(c − b)/det, cyclic
        let g = |p: [f64; 2], q: [f64; 2]| [(p[1] - q[1]) / det, (q[0] - p[0]) / det];
        (area, [g(b, c), g(c, a), g(a, b)])
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn mass_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut m = vec![vec![0.0; n]; n];
        for t in 0..self.tris.len() {
            let (area, _) = self.geometry(t);
            for (a, &ia) in self.tris[t].iter().enumerate() {
                for (b, &ib) in self.tris[t].iter().enumerate() {
                    m[ia][ib] += area * if a == b { 1.0 / 6.0 } else { 1.0 / 12.0 };
                }
            }
        }
        m
    }

    pub fn lumped(&self) -> Vec<f64> {
        let mut l = vec![0.0; self.n()];
        for t in 0..self.tris.len() {
            let (area, _) = self.geometry(t);
            for &i in &self.tris[t] {
                l[i] += area / 3.0;
            }
        }
        l
    }
}

fn smooth_max(rho: f64, x: f64) -> f64 {
    let w = 0.5 / rho;
    if x <= -w {
        0.0
    } else if x >= w {
        x
    } else {
        0.5 * rho * (x + w) * (x + w)
    }
}

fn smooth_max_integral(rho: f64, x: f64) -> f64 {
    let w = 0.5 / rho;
    if x <= -w {
        0.0
    } else if x >= w {
        0.5 * x * x + 1.0 / (24.0 * rho * rho)
    } else {
        rho / 6.0 * (x + w).powi(3)
    }
}

/// Denoising functional
/// `½‖u − g‖²_M + β Σ |T| ψ_ε(∇u) + Σ m_i/ρ (M_ρ(ρ(a − u_i)) + M_ρ(ρ(u_i − b)))`.
pub struct DenoiseOracle {
    pub mesh: OracleMesh,
    pub g: Vec<f64>,
    pub beta: f64,
    pub eps: f64,
    pub rho: f64,
    pub a: f64,
    pub b: f64,
    mass: Vec<Vec<f64>>,
    lumped: Vec<f64>,
}

impl DenoiseOracle {
    pub fn new(mesh: OracleMesh, g: Vec<f64>, beta: f64, eps: f64, rho: f64, a: f64, b: f64) -> Self {
        let mass = mesh.mass_dense();
        let lumped = mesh.lumped();
        DenoiseOracle { mesh, g, beta, eps, rho, a, b, mass, lumped }
    }

    fn grad_u(&self, t: usize, u: &[f64]) -> (f64, [[f64; 2]; 3], [f64; 2]) {
        let (area, gb) = self.mesh.geometry(t);
        let mut d = [0.0; 2];
        for (k, &i) in self.mesh.tris[t].iter().enumerate() {
            d[0] += u[i] * gb[k][0];
            d[1] += u[i] * gb[k][1];
        }
        (area, gb, d)
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        let n = u.len();
        let r: Vec<f64> = (0..n).map(|i| u[i] - self.g[i]).collect();
        let mut j = 0.0;
        for i in 0..n {
            for k in 0..n {
                j += 0.5 * r[i] * self.mass[i][k] * r[k];
            }
        }
        for t in 0..self.mesh.tris.len() {
            let (area, _, d) = self.grad_u(t, u);
            let s = d[0] * d[0] + d[1] * d[1];
            j += self.beta * area * ((self.eps + s).sqrt() + self.eps * s);
        }
        for i in 0..n {
            j += self.lumped[i] / self.rho
                * (smooth_max_integral(self.rho, self.rho * (self.a - u[i]))
                    + smooth_max_integral(self.rho, self.rho * (u[i] - self.b)));
        }
        j
    }

    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let mut g = vec![0.0; n];
        for i in 0..n {
            for k in 0..n {
                g[i] += self.mass[i][k] * (u[k] - self.g[k]);
            }
        }
        for t in 0..self.mesh.tris.len() {
            let (area, gb, d) = self.grad_u(t, u);
            let c = 1.0 / (self.eps + d[0] * d[0] + d[1] * d[1]).sqrt() + 2.0 * self.eps;
            for (k, &i) in self.mesh.tris[t].iter().enumerate() {
                g[i] += self.beta * area * c * (d[0] * gb[k][0] + d[1] * gb[k][1]);
            }
        }
        for i in 0..n {
            g[i] += self.lumped[i]
                * (smooth_max(self.rho, self.rho * (u[i] - self.b)) - smooth_max(self.rho, self.rho * (self.a - u[i])));
        }
        g
    }

    /// Newton on the dense system with a finite-difference Hessian of the
    /// analytic gradient and backtracking, until `‖∇j‖∞ ≤ tol`.
    pub fn minimize(&self, u0: &[f64], tol: f64) -> Vec<f64> {
        let n = u0.len();
        let mut u = u0.to_vec();
        for _ in 0..500 {
            let g = self.gradient(&u);
            if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= tol {
                return u;
            }
            let h = 1e-6;
            let mut hess = vec![vec![0.0; n]; n];
            for k in 0..n {
                let mut up = u.clone();
                let mut um = u.clone();
                up[k] += h;
                um[k] -= h;
                let gp = self.gradient(&up);
                let gm = self.gradient(&um);
                for i in 0..n {
                    hess[i][k] = (gp[i] - gm[i]) / (2.0 * h);
                }
            }
            for i in 0..n {
                for k in 0..i {
                    let s = 0.5 * (hess[i][k] + hess[k][i]);
                    hess[i][k] = s;
                    hess[k][i] = s;
                }
            }
            let mut d = dense_solve(hess, g.iter().map(|v| -v).collect());
            let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                d = g.iter().map(|v| -v).collect();
                slope = -g.iter().map(|v| v * v).sum::<f64>();
            }
            let j0 = self.value(&u);
            let mut s = 1.0;
            loop {
                let trial: Vec<f64> = (0..n).map(|i| u[i] + s * d[i]).collect();
                if self.value(&trial) <= j0 + 1e-4 * s * slope || s < 1e-12 {
                    u = trial;
                    break;
                }
                s *= 0.5;
            }
        }
        u
    }
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// `−Δy = 1` on `(−1, 1)²` with zero boundary values, evaluated at the
/// center by its double sine series.
pub fn poisson_center_series(terms: usize) -> f64 {
    let pi = std::f64::consts::PI;
    let mut s = 0.0;
    for m in (1..terms).step_by(2) {
        for n in (1..terms).step_by(2) {
            let (mf, nf) = (m as f64, n as f64);
            let coef = 16.0 / (pi * pi * mf * nf);
            let lambda = pi * pi * (mf * mf + nf * nf) / 4.0;
            let sign = if ((m + n) / 2 - 1) % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * coef / lambda;
        }
    }
    s
}

pub fn square_mesh(n: usize) -> Arc<Mesh> {
    Arc::new(Mesh::new(Rect::unit_symmetric(), n, n).unwrap())
}

/// Tracking problem with the square target, `β = 1e-4` and bounds `±10`.
pub fn tracking_problem(family: Family, n: usize) -> ControlProblem {
    let mesh = square_mesh(n);
    let y_d = bvpen::problem::square_indicator_target(&mesh);
    let spec = ProblemSpec::new(family, 1e-4, y_d, Bounds::constant(-10.0, 10.0).unwrap()).unwrap();
    ControlProblem::new(mesh, spec).unwrap()
}

pub fn max_abs_diff(a: &NodalField, b: &NodalField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
