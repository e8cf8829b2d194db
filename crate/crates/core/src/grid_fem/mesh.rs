use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Axis-aligned rectangle `[xmin, xmax] × [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Rect {
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    /// The square `[-1, 1]²`.
    pub fn unit_symmetric() -> Self {
        Rect::new(-1.0, 1.0, -1.0, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }

    fn validate(&self) -> Result<()> {
        let coords = [self.xmin, self.xmax, self.ymin, self.ymax];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("rectangle coordinates must be finite"));
        }
        if !(self.xmax > self.xmin && self.ymax > self.ymin) {
            return Err(invalid(format!(
                "degenerate rectangle [{}, {}] x [{}, {}]",
                self.xmin, self.xmax, self.ymin, self.ymax
            )));
        }
        Ok(())
    }
}

/// Compressed sparse row pattern of the node-to-node adjacency.
#[derive(Debug, Clone)]
pub struct CsrPattern {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
}

impl CsrPattern {
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Position of `(row, col)` in the value array, if it is part of the pattern.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let cols = &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]];
        cols.binary_search(&col)
            .ok()
            .map(|k| self.row_ptr[row] + k)
    }
}

/// Structured P1 triangulation of a rectangle.
///
/// Nodes are numbered row-major (`x` fastest): node `(i, j)` has index
/// `j * (nx + 1) + i`. Each cell is split along its lower-left to upper-right
/// diagonal into two counter-clockwise triangles.
#[derive(Debug, Clone)]
pub struct Mesh {
    rect: Rect,
    nx: usize,
    ny: usize,
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    areas: Vec<f64>,
    grad_basis: Vec<[[f64; 2]; 3]>,
    boundary: Vec<bool>,
    lumped_mass: Vec<f64>,
    pattern: CsrPattern,
    // value-array positions of the 3x3 element matrix entries, row-major
    element_slots: Vec<[usize; 9]>,
}

impl Mesh {
    pub fn new(rect: Rect, nx: usize, ny: usize) -> Result<Mesh> {
        rect.validate()?;
        if nx == 0 || ny == 0 {
            return Err(invalid(format!(
                "number of cells per side must be positive (got {nx} x {ny})"
            )));
        }
        let hx = (rect.xmax - rect.xmin) / nx as f64;
        let hy = (rect.ymax - rect.ymin) / ny as f64;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut boundary = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            // pin the last coordinate to the exact rectangle edge
            let y = if j == ny {
                rect.ymax
            } else {
                rect.ymin + j as f64 * hy
            };
            for i in 0..=nx {
                let x = if i == nx {
                    rect.xmax
                } else {
                    rect.xmin + i as f64 * hx
                };
                nodes.push([x, y]);
                boundary.push(i == 0 || j == 0 || i == nx || j == ny);
            }
        }

        let node = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let n00 = node(i, j);
                let n10 = node(i + 1, j);
                let n01 = node(i, j + 1);
                let n11 = node(i + 1, j + 1);
                triangles.push([n00, n10, n11]);
                triangles.push([n00, n11, n01]);
            }
        }

        let mut areas = Vec::with_capacity(triangles.len());
        let mut grad_basis = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let [p0, p1, p2] = tri.map(|k| nodes[k]);
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            areas.push(0.5 * det);
            grad_basis.push([
                [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
                [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
                [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
            ]);
        }

        let n_nodes = nodes.len();
        let mut lumped_mass = vec![0.0; n_nodes];
        for (tri, &area) in triangles.iter().zip(&areas) {
            for &k in tri {
                lumped_mass[k] += area / 3.0;
            }
        }

        let pattern = build_pattern(n_nodes, &triangles);
        let element_slots = triangles
            .iter()
            .map(|tri| {
                let mut slots = [0usize; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        slots[3 * a + b] = pattern
                            .position(tri[a], tri[b])
                            .expect("element entry missing from pattern");
                    }
                }
                slots
            })
            .collect();

        Ok(Mesh {
            rect,
            nx,
            ny,
            nodes,
            triangles,
            areas,
            grad_basis,
            boundary,
            lumped_mass,
            pattern,
            element_slots,
        })
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn grad_basis(&self) -> &[[[f64; 2]; 3]] {
        &self.grad_basis
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Diagonal of the lumped (row-sum) mass matrix.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    pub fn pattern(&self) -> &CsrPattern {
        &self.pattern
    }

    pub(crate) fn element_slots(&self) -> &[[usize; 9]] {
        &self.element_slots
    }

    /// Characteristic mesh size: length of one cell diagonal.
    pub fn h(&self) -> f64 {
        let hx = (self.rect.xmax - self.rect.xmin) / self.nx as f64;
        let hy = (self.rect.ymax - self.rect.ymin) / self.ny as f64;
        hx.hypot(hy)
    }

    pub fn domain_area(&self) -> f64 {
        self.rect.area()
    }

    /// Interior node indices in increasing order.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&k| !self.boundary[k]).collect()
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> NodalField {
        NodalField::from_values(self.nodes.iter().map(|p| f(p[0], p[1])).collect())
    }

    pub(crate) fn check_nodal(&self, field: &NodalField, what: &str) -> Result<()> {
        if field.len() != self.n_nodes() {
            return Err(invalid(format!(
                "{what}: field has {} values but the mesh has {} nodes",
                field.len(),
                self.n_nodes()
            )));
        }
        Ok(())
    }
}

fn build_pattern(n_nodes: usize, triangles: &[[usize; 3]]) -> CsrPattern {
    let mut adjacency: Vec<Vec<usize>> = (0..n_nodes).map(|k| vec![k]).collect();
    for tri in triangles {
        for &a in tri {
            for &b in tri {
                adjacency[a].push(b);
            }
        }
    }
    let mut row_ptr = Vec::with_capacity(n_nodes + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    for mut cols in adjacency {
        cols.sort_unstable();
        cols.dedup();
        col_idx.extend(cols);
        row_ptr.push(col_idx.len());
    }
    CsrPattern { row_ptr, col_idx }
}

/// A P1 function given by its nodal coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    values: Vec<f64>,
}

impl NodalField {
    pub fn from_values(values: Vec<f64>) -> Self {
        NodalField { values }
    }

    pub fn zeros(n: usize) -> Self {
        NodalField {
            values: vec![0.0; n],
        }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        NodalField {
            values: vec![value; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &NodalField) -> NodalField {
        debug_assert_eq!(self.len(), other.len());
        NodalField::from_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &NodalField) -> NodalField {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, alpha: f64) -> NodalField {
        NodalField::from_values(self.values.iter().map(|v| alpha * v).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> NodalField {
        NodalField::from_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn dot(&self, other: &NodalField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<usize> for NodalField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl std::ops::IndexMut<usize> for NodalField {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

/// One constant 2-vector per triangle (P1 gradients, the TV dual proxy μ).
#[derive(Debug, Clone, PartialEq)]
pub struct ElementVectorField {
    vectors: Vec<[f64; 2]>,
}

impl ElementVectorField {
    pub fn from_vectors(vectors: Vec<[f64; 2]>) -> Self {
        ElementVectorField { vectors }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }
}

impl std::ops::Index<usize> for ElementVectorField {
    type Output = [f64; 2];
    fn index(&self, i: usize) -> &[f64; 2] {
        &self.vectors[i]
    }
}
