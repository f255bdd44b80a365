//! Preconditioned MinRes (Paige-Saunders recurrences).

use super::precond::Preconditioner;
use crate::error::{Error, Result};
use crate::sparse::{dot, SparseSymMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinresOptions {
    /// Stop when the preconditioned residual norm drops below `tol` times
    /// its initial value.
    pub tol: f64,
    pub max_iters: usize,
    /// Relative tolerance of the symmetry pre-check.
    pub symmetry_tol: f64,
}

impl Default for MinresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 10_000,
            symmetry_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Preconditioned residual norms from the recurrence, starting with the
    /// initial one.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub final_relative_residual: f64,
}

/// Solves `A x = b` from a zero initial guess.
pub fn minres<P: Preconditioner + ?Sized>(
    a: &SparseSymMatrix,
    b: &[f64],
    precond: &P,
    opts: &MinresOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    minres_with_guess(a, b, vec![0.0; b.len()], precond, opts)
}

/// Solves `A x = b` starting from `x0`. `A` may be singular as long as the
/// system is consistent.
pub fn minres_with_guess<P: Preconditioner + ?Sized>(
    a: &SparseSymMatrix,
    b: &[f64],
    x0: Vec<f64>,
    precond: &P,
    opts: &MinresOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    run(a, b, x0, None, precond, opts)
}

/// Solves the consistent singular system `A x = b` with `A kernel = 0`.
/// Every Lanczos residual is projected orthogonal to `kernel`, which keeps
/// rounding errors from building up along the null direction.
pub fn minres_singular<P: Preconditioner + ?Sized>(
    a: &SparseSymMatrix,
    b: &[f64],
    kernel: &[f64],
    precond: &P,
    opts: &MinresOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    if kernel.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: kernel.len(),
        });
    }
    let norm = dot(kernel, kernel).sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidArgument(
            "kernel vector must be nonzero".into(),
        ));
    }
    let unit: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
    run(a, b, vec![0.0; b.len()], Some(&unit), precond, opts)
}

fn project_out(v: &mut [f64], unit: Option<&[f64]>) {
    if let Some(k) = unit {
        let c = dot(v, k);
        for (vi, ki) in v.iter_mut().zip(k) {
            *vi -= c * ki;
        }
    }
}

fn run<P: Preconditioner + ?Sized>(
    a: &SparseSymMatrix,
    b: &[f64],
    x0: Vec<f64>,
    kernel: Option<&[f64]>,
    precond: &P,
    opts: &MinresOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.dim();
    for got in [b.len(), x0.len(), precond.dim()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must lie in (0, 1), got {}",
            opts.tol
        )));
    }
    a.check_symmetric(opts.symmetry_tol)?;

    let mut x = x0;
    let ax = a.matvec(&x);
    let mut r1: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    project_out(&mut r1, kernel);
    let mut y = vec![0.0; n];
    precond.apply(&r1, &mut y);
    let beta1_sq = dot(&r1, &y);
    if beta1_sq < 0.0 {
        return Err(Error::IndefinitePreconditioner(beta1_sq));
    }
    let beta1 = beta1_sq.sqrt();
    let mut report = SolveReport {
        iterations: 0,
        residual_history: vec![beta1],
        converged: true,
        final_relative_residual: 0.0,
    };
    if beta1 == 0.0 {
        return Ok((x, report));
    }

    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln) = (0.0, 0.0);
    let mut phibar = beta1;
    let (mut cs, mut sn) = (-1.0, 0.0);
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let eps = f64::EPSILON;

    report.converged = false;
    for itn in 1..=opts.max_iters {
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        a.matvec_into(&v, &mut y);
        if itn >= 2 {
            let c = beta / oldb;
            for (yi, ri) in y.iter_mut().zip(&r1) {
                *yi -= c * ri;
            }
        }
        let alfa = dot(&v, &y);
        let c = alfa / beta;
        for (yi, ri) in y.iter_mut().zip(&r2) {
            *yi -= c * ri;
        }
        project_out(&mut y, kernel);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        precond.apply(&r2, &mut y);
        oldb = beta;
        let beta_sq = dot(&r2, &y);
        if beta_sq < 0.0 {
            return Err(Error::IndefinitePreconditioner(beta_sq));
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta);
        if !gamma.is_finite() {
            return Err(Error::Breakdown(itn));
        }
        let gamma = gamma.max(eps);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }

        report.iterations = itn;
        report.residual_history.push(phibar);
        if phibar <= opts.tol * beta1 {
            report.converged = true;
            break;
        }
        if beta == 0.0 {
            // Exact invariant subspace: the residual cannot be reduced further.
            break;
        }
    }
    report.final_relative_residual = phibar / beta1;
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::precond::BlockPreconditioner;
    use crate::sparse::norm2;

    #[test]
    fn identity_converges_in_one_step() {
        let a = SparseSymMatrix::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 0.0];
        let (x, rep) = minres(
            &a,
            &b,
            &BlockPreconditioner::identity(5),
            &MinresOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 1);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_rhs_returns_immediately() {
        let a = SparseSymMatrix::identity(3);
        let (x, rep) = minres(
            &a,
            &[0.0; 3],
            &BlockPreconditioner::identity(3),
            &MinresOptions::default(),
        )
        .unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
    }

    #[test]
    fn indefinite_system() {
        let a = SparseSymMatrix::from_dense(&[
            vec![1.0, 2.0, 0.0],
            vec![2.0, -1.0, 1.0],
            vec![0.0, 1.0, 3.0],
        ]);
        let b = [1.0, 0.0, -1.0];
        let (x, rep) = minres(
            &a,
            &b,
            &BlockPreconditioner::identity(3),
            &MinresOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) < 1e-12);
        assert!(rep.residual_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn singular_consistent_system() {
        // Graph Laplacian of a path: kernel = constants.
        let a = SparseSymMatrix::from_dense(&[
            vec![1.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 1.0],
        ]);
        let b = [1.0, 0.0, -1.0];
        let (x, rep) = minres(
            &a,
            &b,
            &BlockPreconditioner::identity(3),
            &MinresOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) < 1e-12);
    }

    #[test]
    fn nonsymmetric_rejected() {
        let a = SparseSymMatrix::from_dense(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        let err = minres(
            &a,
            &[1.0, 1.0],
            &BlockPreconditioner::identity(2),
            &MinresOptions::default(),
        );
        assert!(matches!(err, Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn indefinite_preconditioner_detected() {
        struct Negative;
        impl Preconditioner for Negative {
            fn dim(&self) -> usize {
                2
            }
            fn apply(&self, r: &[f64], z: &mut [f64]) {
                z[0] = -r[0];
                z[1] = -r[1];
            }
        }
        let a = SparseSymMatrix::identity(2);
        let err = minres(&a, &[1.0, 1.0], &Negative, &MinresOptions::default());
        assert!(matches!(err, Err(Error::IndefinitePreconditioner(_))));
    }

    #[test]
    fn max_iters_reported() {
        let d: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let a = SparseSymMatrix::from_diagonal(&d);
        let b = vec![1.0; 50];
        let opts = MinresOptions {
            max_iters: 3,
            ..Default::default()
        };
        let (_, rep) = minres(&a, &b, &BlockPreconditioner::identity(50), &opts).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
        assert_eq!(rep.residual_history.len(), 4);
        assert!(rep.final_relative_residual > opts.tol);
    }

    #[test]
    fn singular_laplacian_with_kernel_projection() {
        // Path graph Laplacian with the constant kernel.
        let n = 30;
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n - 1 {
            rows[i][i] += 1.0;
            rows[i + 1][i + 1] += 1.0;
            rows[i][i + 1] -= 1.0;
            rows[i + 1][i] -= 1.0;
        }
        let a = SparseSymMatrix::from_dense(&rows);
        let mut b: Vec<f64> = (0..n).map(|i| ((i * 13) % 7) as f64).collect();
        let mean = b.iter().sum::<f64>() / n as f64;
        b.iter_mut().for_each(|v| *v -= mean);
        let p = BlockPreconditioner::identity(n);
        let (x, rep) =
            minres_singular(&a, &b, &vec![1.0; n], &p, &MinresOptions::default()).unwrap();
        assert!(rep.converged);
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) < 1e-10 * norm2(&b));
        assert!(minres_singular(&a, &b, &vec![0.0; n], &p, &MinresOptions::default()).is_err());
        assert!(minres_singular(&a, &b, &[1.0], &p, &MinresOptions::default()).is_err());
    }
}
