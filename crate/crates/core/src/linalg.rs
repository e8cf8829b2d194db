//! Sparse direct solvers.
//!
//! Factorizations are delegated to `faer` (sparse Cholesky for the SPD state
//! and adjoint operators, sparse LU for the indefinite Newton systems). The
//! symbolic analysis is cached and reused while the sparsity pattern is
//! unchanged, which is the common case inside the Newton loop.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Side};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid_fem::CsrMatrix;

/// Square sparse matrix collected as triplets; duplicates are summed.
#[derive(Debug, Clone)]
pub struct TripletMatrix {
    n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl TripletMatrix {
    pub fn new(n: usize) -> Self {
        TripletMatrix {
            n,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push(Triplet::new(row, col, value));
    }

    /// Adds `scale · A[rows, cols]` at offset `(row_off, col_off)`, where
    /// `row_map`/`col_map` send an index of `A` to its local index in the
    /// block (or drop it).
    pub fn add_block(
        &mut self,
        a: &CsrMatrix,
        row_map: &[Option<usize>],
        col_map: &[Option<usize>],
        row_off: usize,
        col_off: usize,
        scale: f64,
    ) {
        for i in 0..a.dim() {
            let Some(ri) = row_map[i] else { continue };
            for (j, v) in a.row(i) {
                if let Some(cj) = col_map[j] {
                    self.push(row_off + ri, col_off + cj, scale * v);
                }
            }
        }
    }

    /// Adds a diagonal block; zero entries are kept so the pattern stays fixed.
    pub fn add_diagonal(&mut self, offset: usize, diag: &[f64]) {
        for (k, &d) in diag.iter().enumerate() {
            self.push(offset + k, offset + k, d);
        }
    }

    /// Adds a diagonal at `(row_off + k, col_off + k)`.
    pub fn add_diagonal_at(&mut self, row_off: usize, col_off: usize, diag: &[f64]) {
        for (k, &d) in diag.iter().enumerate() {
            self.push(row_off + k, col_off + k, d);
        }
    }

    pub fn entries(&self) -> &[Triplet<usize, usize, f64>] {
        &self.entries
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for t in &self.entries {
            y[t.row] += t.val * x[t.col];
        }
        y
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        SparseColMat::try_new_from_triplets(self.n, self.n, &self.entries)
            .map_err(|e| Error::LinearSolve(format!("matrix construction: {e:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct PatternKey {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl PatternKey {
    fn of(mat: &SparseColMat<usize, f64>) -> Self {
        let s = mat.symbolic();
        PatternKey {
            col_ptr: s.col_ptr().to_vec(),
            row_idx: s.row_idx().to_vec(),
        }
    }
}

fn to_col(rhs: &[f64]) -> Col<f64> {
    Col::from_fn(rhs.len(), |i| rhs[i])
}

fn from_col(x: &Col<f64>) -> Vec<f64> {
    (0..x.nrows()).map(|i| x[i]).collect()
}

/// Sparse Cholesky with a cached symbolic factorization (the first pattern
/// seen is cached; other patterns are analyzed on every call).
#[derive(Default)]
pub struct CholeskySolver {
    cache: OnceLock<(PatternKey, SymbolicLlt<usize>)>,
}

/// A numeric Cholesky factor.
pub struct CholeskyFactor {
    llt: Llt<usize, f64>,
}

impl CholeskySolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factor(&self, a: &TripletMatrix) -> Result<CholeskyFactor> {
        let mat = a.to_faer()?;
        let key = PatternKey::of(&mat);
        let symbolic = match self.cache.get() {
            Some((k, s)) if *k == key => s.clone(),
            cached => {
                let s = SymbolicLlt::try_new(mat.symbolic(), Side::Lower)
                    .map_err(|e| Error::LinearSolve(format!("symbolic Cholesky: {e:?}")))?;
                if cached.is_none() {
                    let _ = self.cache.set((key, s.clone()));
                }
                s
            }
        };
        let llt = Llt::try_new_with_symbolic(symbolic, mat.as_ref(), Side::Lower)
            .map_err(|e| Error::LinearSolve(format!("Cholesky: {e:?}")))?;
        Ok(CholeskyFactor { llt })
    }
}

impl CholeskyFactor {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        from_col(&self.llt.solve(&to_col(rhs)))
    }
}

/// Sparse LU with partial pivoting and a cached symbolic analysis.
#[derive(Default)]
pub struct LuSolver {
    cache: OnceLock<(PatternKey, SymbolicLu<usize>)>,
}

/// A numeric LU factor.
pub struct LuFactor {
    lu: Lu<usize, f64>,
}

impl LuSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factor(&self, a: &TripletMatrix) -> Result<LuFactor> {
        let mat = a.to_faer()?;
        let key = PatternKey::of(&mat);
        let symbolic = match self.cache.get() {
            Some((k, s)) if *k == key => s.clone(),
            cached => {
                let s = SymbolicLu::try_new(mat.symbolic())
                    .map_err(|e| Error::LinearSolve(format!("symbolic LU: {e:?}")))?;
                if cached.is_none() {
                    let _ = self.cache.set((key, s.clone()));
                }
                s
            }
        };
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref())
            .map_err(|e| Error::LinearSolve(format!("LU: {e:?}")))?;
        Ok(LuFactor { lu })
    }
}

impl LuFactor {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        from_col(&self.lu.solve(&to_col(rhs)))
    }
}
