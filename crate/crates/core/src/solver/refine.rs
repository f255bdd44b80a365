//! Correction of one diagonal block of the unknowns against the residual.

use super::factor::SparseCholesky;
use crate::error::{Error, Result};
use crate::sparse::SparseSymMatrix;

/// Replaces `x[range]` by `x[range] + A_rr^{-1} (b - A x)[range]`, so the
/// equations in `range` hold up to rounding while the other unknowns stay
/// fixed. `block` must factor the principal block `A_rr`. Returns the
/// Euclidean norm of the correction.
pub fn block_correction(
    a: &SparseSymMatrix,
    b: &[f64],
    x: &mut [f64],
    range: std::ops::Range<usize>,
    block: &SparseCholesky,
) -> Result<f64> {
    let n = a.dim();
    for got in [b.len(), x.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    if range.end > n || block.dim() != range.len() {
        return Err(Error::DimensionMismatch {
            expected: range.len(),
            got: block.dim(),
        });
    }
    let mut r: Vec<f64> = range
        .clone()
        .map(|i| b[i] - a.row(i).map(|(j, v)| v * x[j]).sum::<f64>())
        .collect();
    block.solve_in_place(&mut r);
    for (xi, d) in x[range].iter_mut().zip(&r) {
        *xi += d;
    }
    Ok(r.iter().map(|d| d * d).sum::<f64>().sqrt())
}
