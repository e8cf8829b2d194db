use super::mesh::CsrPattern;

/// Square sparse matrix in CSR layout.
///
/// Matrices assembled on the same mesh share the node adjacency pattern, so
/// linear combinations can be formed value-by-value.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros_like_pattern(pattern: &CsrPattern) -> Self {
        CsrMatrix {
            n: pattern.row_ptr.len() - 1,
            row_ptr: pattern.row_ptr.clone(),
            col_idx: pattern.col_idx.clone(),
            values: vec![0.0; pattern.nnz()],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Iterates over `(col, value)` of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `xᵀ A x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let ax = self.matvec(x);
        ax.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        ay.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// `max |A_ij − A_ji|`
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `self + alpha * other` for matrices on the same pattern.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.col_idx, other.col_idx, "pattern mismatch");
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        out
    }

    /// Adds `diag[i]` to every diagonal entry.
    pub fn add_diagonal(&mut self, diag: &[f64]) {
        assert_eq!(diag.len(), self.n);
        for (i, d) in diag.iter().enumerate() {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            let k = self.col_idx[range.clone()]
                .binary_search(&i)
                .expect("diagonal missing from pattern");
            self.values[range.start + k] += d;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        dense
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> CsrMatrix {
        let pattern = CsrPattern {
            row_ptr: vec![0, 2, 4],
            col_idx: vec![0, 1, 0, 1],
        };
        let mut m = CsrMatrix::zeros_like_pattern(&pattern);
        m.values_mut().copy_from_slice(&[2.0, -1.0, -1.0, 3.0]);
        m
    }

    #[test]
    fn basic_products() {
        let m = tiny();
        assert_eq!(m.matvec(&[1.0, 1.0]), vec![1.0, 2.0]);
        assert_eq!(m.quad_form(&[1.0, 1.0]), 3.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.max_asymmetry(), 0.0);
        let mut d = m.clone();
        d.add_diagonal(&[1.0, 1.0]);
        assert_eq!(d.get(0, 0), 3.0);
        assert_eq!(m.add_scaled(2.0, &m).get(1, 1), 9.0);
    }
}
