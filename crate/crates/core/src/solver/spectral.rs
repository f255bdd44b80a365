//! Extreme generalized eigenvalues of the pencil `(A, Ã)` on the complement
//! of the kernel of `A`.

use faer::{Mat, Par, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::factor::factorize_spd;
use crate::error::{Error, Result};
use crate::sparse::{dot, SparseSymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    /// Dense Cholesky reduction and full symmetric eigendecomposition.
    Dense,
    /// Lanczos on `Ã^{-1} A` in the `Ã` inner product.
    Lanczos,
    /// Dense up to [`SpectralOptions::dense_limit`], Lanczos beyond.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    pub method: EigenMethod,
    pub dense_limit: usize,
    /// Maximum Lanczos steps.
    pub max_steps: usize,
    /// Relative Ritz residual required for both extreme eigenvalues.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            method: EigenMethod::Auto,
            dense_limit: 1200,
            max_steps: 1500,
            tol: 1e-8,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub method: EigenMethod,
    /// Lanczos steps taken (0 for the dense route).
    pub steps: usize,
}

impl SpectralBounds {
    pub fn condition(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }
}

/// `(lambda_min, lambda_max)` of `A x = lambda Ã x` restricted to the
/// `Ã`-orthogonal complement of `kernel`.
pub fn spectral_equivalence(
    a: &SparseSymMatrix,
    a_tilde: &SparseSymMatrix,
    kernel: &[f64],
    opts: &SpectralOptions,
) -> Result<SpectralBounds> {
    let n = a.dim();
    for got in [a_tilde.dim(), kernel.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "pencil needs dimension at least 2".into(),
        ));
    }
    let method = match opts.method {
        EigenMethod::Auto if n <= opts.dense_limit => EigenMethod::Dense,
        EigenMethod::Auto => EigenMethod::Lanczos,
        m => m,
    };
    match method {
        EigenMethod::Dense => dense(a, a_tilde, kernel),
        _ => lanczos(a, a_tilde, kernel, opts),
    }
}

fn to_mat(m: &SparseSymMatrix) -> Mat<f64> {
    let n = m.dim();
    let mut out = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, v) in m.row(i) {
            out[(i, j)] += v;
        }
    }
    out
}

fn dense(a: &SparseSymMatrix, a_tilde: &SparseSymMatrix, kernel: &[f64]) -> Result<SpectralBounds> {
    let n = a.dim();
    let llt = to_mat(a_tilde).llt(Side::Lower).map_err(|e| {
        Error::NotSpd(format!(
            "dense Cholesky of the preconditioner form failed: {e:?}"
        ))
    })?;
    let l = llt.L();
    // C = L^{-1} A L^{-T}
    let mut c = to_mat(a);
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    let mut ct = c.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, ct.as_mut(), Par::Seq);
    let sym = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (ct[(i, j)] + ct[(j, i)]));
    let evd = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenNotConverged(n))?;
    let u = evd.U();
    let s = evd.S().column_vector();
    // The kernel of C is spanned by L^T k.
    let mut ltk = vec![0.0; n];
    for j in 0..n {
        let mut acc = 0.0;
        for i in j..n {
            acc += l[(i, j)] * kernel[i];
        }
        ltk[j] = acc;
    }
    let mut drop = 0;
    let mut best = -1.0;
    for col in 0..n {
        let overlap: f64 = (0..n).map(|i| u[(i, col)] * ltk[i]).sum::<f64>().abs();
        if overlap > best {
            best = overlap;
            drop = col;
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for col in (0..n).filter(|&c| c != drop) {
        lo = lo.min(s[col]);
        hi = hi.max(s[col]);
    }
    Ok(SpectralBounds {
        lambda_min: lo,
        lambda_max: hi,
        method: EigenMethod::Dense,
        steps: 0,
    })
}

fn lanczos(
    a: &SparseSymMatrix,
    a_tilde: &SparseSymMatrix,
    kernel: &[f64],
    opts: &SpectralOptions,
) -> Result<SpectralBounds> {
    let n = a.dim();
    let factor = factorize_spd(a_tilde)?;
    let tk = a_tilde.matvec(kernel);
    let kk = dot(kernel, &tk);
    // Ã-orthogonal projection away from the kernel.
    let deflate = |v: &mut [f64]| {
        let c = dot(&tk, v) / kk;
        for (vi, ki) in v.iter_mut().zip(kernel) {
            *vi -= c * ki;
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    deflate(&mut q);
    let norm = dot(&q, &a_tilde.matvec(&q)).sqrt();
    q.iter_mut().for_each(|v| *v /= norm);

    let max_steps = opts.max_steps.min(n - 1).max(1);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    // Ã q_j, kept for cheap reorthogonalization.
    let mut tbasis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last = None;

    for step in 0..max_steps {
        let tq = a_tilde.matvec(&q);
        let aq = a.matvec(&q);
        let alpha = dot(&q, &aq);
        let mut w = factor.solve(&aq);
        basis.push(q.clone());
        tbasis.push(tq);
        alphas.push(alpha);
        // Full reorthogonalization (twice) in the Ã inner product.
        for _ in 0..2 {
            deflate(&mut w);
            for (qj, tqj) in basis.iter().zip(&tbasis) {
                let c = dot(tqj, &w);
                for (wi, qi) in w.iter_mut().zip(qj) {
                    *wi -= c * qi;
                }
            }
        }
        let beta = dot(&w, &a_tilde.matvec(&w)).max(0.0).sqrt();
        let m = step + 1;
        let check = m == max_steps || beta <= 1e-14 * alpha.abs().max(1.0) || m % 10 == 0;
        if check {
            let (theta, last_row) = tridiagonal_eigen(&alphas, &betas)?;
            let (imin, imax) = (0, theta.len() - 1);
            let scale = theta[imax].abs().max(f64::MIN_POSITIVE);
            let res_min = (beta * last_row[imin]).abs() / theta[imin].abs().max(1e-300);
            let res_max = (beta * last_row[imax]).abs() / scale;
            last = Some((theta[imin], theta[imax], m));
            if (res_min <= opts.tol && res_max <= opts.tol) || beta <= 1e-14 * alpha.abs().max(1.0)
            {
                return Ok(SpectralBounds {
                    lambda_min: theta[imin],
                    lambda_max: theta[imax],
                    method: EigenMethod::Lanczos,
                    steps: m,
                });
            }
        }
        betas.push(beta);
        q = w.iter().map(|v| v / beta).collect();
    }
    match last {
        Some((_, _, m)) => Err(Error::EigenNotConverged(m)),
        None => Err(Error::EigenNotConverged(0)),
    }
}

/// Eigenvalues (ascending) of the symmetric tridiagonal matrix with
/// diagonal `alphas` and off-diagonal `betas`, and the last components of
/// the corresponding eigenvectors.
fn tridiagonal_eigen(alphas: &[f64], betas: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = alphas.len();
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alphas[i]
        } else if i == j + 1 {
            betas[j]
        } else if j == i + 1 {
            betas[i]
        } else {
            0.0
        }
    });
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenNotConverged(m))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    Ok((
        (0..m).map(|i| s[i]).collect(),
        (0..m).map(|i| u[(m - 1, i)]).collect(),
    ))
}
