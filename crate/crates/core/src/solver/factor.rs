//! Sparse Cholesky factorization of SPD blocks, backed by faer.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{MatMut, Side};

use crate::error::{Error, Result};
use crate::sparse::SparseSymMatrix;

/// `L L^T` factorization with a fill-reducing ordering. Deterministic:
/// faer runs sequentially without the `rayon` feature.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    dim: usize,
    llt: Option<Llt<usize, f64>>,
}

impl SparseCholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Overwrites `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.dim);
        if let Some(llt) = &self.llt {
            let n = self.dim;
            llt.solve_in_place(MatMut::from_column_major_slice_mut(b, n, 1));
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Factorizes a symmetric positive definite matrix.
pub fn factorize_spd(a: &SparseSymMatrix) -> Result<SparseCholesky> {
    a.check_symmetric(1e-12)?;
    let n = a.dim();
    if n == 0 {
        return Ok(SparseCholesky { dim: 0, llt: None });
    }
    // A symmetric CSR matrix is its own CSC transpose.
    let symbolic =
        SymbolicSparseColMatRef::new_checked(n, n, a.row_offsets(), None, a.col_indices());
    let sym = SymbolicLlt::try_new(symbolic, Side::Lower)
        .map_err(|e| Error::NotSpd(format!("symbolic factorization failed: {e:?}")))?;
    let mat = SparseColMatRef::new(symbolic, a.values());
    let llt = Llt::try_new_with_symbolic(sym, mat, Side::Lower)
        .map_err(|e| Error::NotSpd(format!("non-positive pivot: {e:?}")))?;
    Ok(SparseCholesky {
        dim: n,
        llt: Some(llt),
    })
}
