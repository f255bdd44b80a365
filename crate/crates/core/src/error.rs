use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the mesh, space, assembly, solver and postprocessing layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cell {cell} is degenerate (|det B| = {det:e})")]
    DegenerateCell { cell: usize, det: f64 },

    #[error("unsupported quadrature degree {degree} on {domain}")]
    UnsupportedQuadrature { domain: &'static str, degree: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max |A - A^T| = {asym:e}, max |A| = {scale:e})")]
    NotSymmetric { asym: f64, scale: f64 },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("preconditioner is not positive definite (r^T P^-1 r = {0:e})")]
    IndefinitePreconditioner(f64),

    #[error("MinRes breakdown at iteration {0}")]
    Breakdown(usize),

    #[error("eigenvalue iteration did not converge after {0} steps")]
    EigenNotConverged(usize),

    #[error("local RTN moment system is singular on cell {0}")]
    SingularMomentSystem(usize),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("malformed CSV: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
