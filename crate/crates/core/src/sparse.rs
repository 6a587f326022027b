//! Fixed-pattern compressed-column matrices and a direct LU solver.
//!
//! Every fluid form shares the Q1 connectivity pattern, so forms are stored as
//! value arrays over one [`CscPattern`] and combined by plain linear algebra on
//! those arrays. Factorization is delegated to `faer`'s sparse LU with a
//! symbolic analysis computed once per pattern.

use std::sync::{Arc, Once};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, Par};
use nalgebra::{DMatrix, DVector};

use crate::error::{FsiError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CscPattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl CscPattern {
    /// Builds a square pattern from `(row, col)` pairs; duplicates are merged.
    pub fn from_entries(n: usize, mut entries: Vec<(usize, usize)>) -> Self {
        entries.sort_unstable_by_key(|&(r, c)| (c, r));
        entries.dedup();
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        for &(r, c) in &entries {
            col_ptr[c + 1] += 1;
            row_idx.push(r);
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        Self { n, col_ptr, row_idx }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Position of `(row, col)` in the value array.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.col_ptr[col];
        let hi = self.col_ptr[col + 1];
        self.row_idx[lo..hi].binary_search(&row).ok().map(|k| lo + k)
    }

    fn symbolic(&self) -> SymbolicSparseColMatRef<'_, usize> {
        SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx)
    }
}

/// A square matrix with values over a shared pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pattern: Arc<CscPattern>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(pattern: Arc<CscPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<CscPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    /// Adds `value` at `(row, col)`; the entry must belong to the pattern.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        let k = self
            .pattern
            .position(row, col)
            .unwrap_or_else(|| panic!("entry ({row}, {col}) outside the sparsity pattern"));
        self.values[k] += value;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.position(row, col).map_or(0.0, |k| self.values[k])
    }

    /// `self += alpha * other`; both must share the same pattern.
    pub fn axpy(&mut self, alpha: f64, other: &CscMatrix) {
        debug_assert!(Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> CscMatrix {
        CscMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.pattern.n;
        let mut y = DVector::zeros(n);
        for c in 0..n {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for k in self.pattern.col_ptr[c]..self.pattern.col_ptr[c + 1] {
                y[self.pattern.row_idx[k]] += self.values[k] * xc;
            }
        }
        y
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for c in 0..self.pattern.n {
            let yc = y[c];
            for k in self.pattern.col_ptr[c]..self.pattern.col_ptr[c + 1] {
                acc += x[self.pattern.row_idx[k]] * self.values[k] * yc;
            }
        }
        acc
    }

    pub fn quadratic(&self, x: &DVector<f64>) -> f64 {
        self.bilinear(x, x)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.pattern.n;
        let mut d = DMatrix::zeros(n, n);
        for c in 0..n {
            for k in self.pattern.col_ptr[c]..self.pattern.col_ptr[c + 1] {
                d[(self.pattern.row_idx[k], c)] += self.values[k];
            }
        }
        d
    }
}

static SEQUENTIAL_FAER: Once = Once::new();

/// Sparse LU solver bound to one pattern; the symbolic analysis is reused
/// across numeric factorizations.
#[derive(Debug, Clone)]
pub struct DirectSolver {
    pattern: Arc<CscPattern>,
    symbolic: Option<SymbolicLu<usize>>,
}

impl DirectSolver {
    pub fn new(pattern: Arc<CscPattern>) -> Result<Self> {
        // path-level parallelism lives above the solver; keep factorizations single-threaded
        SEQUENTIAL_FAER.call_once(|| faer::set_global_parallelism(Par::Seq));
        let symbolic = if pattern.n == 0 {
            None
        } else {
            Some(
                SymbolicLu::try_new(pattern.symbolic())
                    .map_err(|e| FsiError::SolverFailure(format!("symbolic LU: {e:?}")))?,
            )
        };
        Ok(Self { pattern, symbolic })
    }

    pub fn solve(&self, matrix: &CscMatrix, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.pattern.n;
        if n == 0 {
            return Ok(DVector::zeros(0));
        }
        if matrix.pattern.as_ref() != self.pattern.as_ref() {
            return Err(FsiError::SolverFailure("matrix pattern does not match solver".into()));
        }
        let symbolic = self.symbolic.clone().expect("nonempty pattern has a symbolic factorization");
        let mat = SparseColMatRef::new(self.pattern.symbolic(), &matrix.values);
        let lu = Lu::try_new_with_symbolic(symbolic, mat)
            .map_err(|e| FsiError::SolverFailure(format!("numeric LU: {e:?}")))?;
        let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        let x = lu.solve(&b);
        let out = DVector::from_fn(n, |i, _| x[(i, 0)]);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(FsiError::SolverFailure("non-finite solution".into()));
        }
        Ok(out)
    }
}
