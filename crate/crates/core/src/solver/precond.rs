//! Block-diagonal preconditioner `blockdiag(M_c, M_0)^{-1}` and its cheap
//! variants.

use std::fmt;
use std::str::FromStr;

use super::factor::{factorize_spd, SparseCholesky};
use crate::error::{Error, Result};
use crate::sparse::SparseSymMatrix;

/// Symmetric positive definite operator `z = P^{-1} r`.
pub trait Preconditioner {
    fn dim(&self) -> usize;
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrecondMode {
    /// Exact sparse factorizations of both blocks.
    #[default]
    ExactBlock,
    /// Inverse diagonals of both blocks.
    JacobiBlock,
    /// Identity.
    None,
}

impl PrecondMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PrecondMode::ExactBlock => "exact-block",
            PrecondMode::JacobiBlock => "jacobi",
            PrecondMode::None => "none",
        }
    }
}

impl fmt::Display for PrecondMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrecondMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-block" | "exact" => Ok(PrecondMode::ExactBlock),
            "jacobi" | "jacobi-block" => Ok(PrecondMode::JacobiBlock),
            "none" => Ok(PrecondMode::None),
            other => Err(Error::Parse(format!("unknown preconditioner '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Blocks {
    Exact {
        c: SparseCholesky,
        z: SparseCholesky,
    },
    Jacobi {
        inv_diag: Vec<f64>,
    },
    Identity,
}

#[derive(Debug, Clone)]
pub struct BlockPreconditioner {
    mode: PrecondMode,
    n_cont: usize,
    n_const: usize,
    blocks: Blocks,
}

impl BlockPreconditioner {
    pub fn identity(dim: usize) -> Self {
        Self {
            mode: PrecondMode::None,
            n_cont: dim,
            n_const: 0,
            blocks: Blocks::Identity,
        }
    }

    pub fn mode(&self) -> PrecondMode {
        self.mode
    }

    pub fn block_sizes(&self) -> (usize, usize) {
        (self.n_cont, self.n_const)
    }
}

/// Builds the preconditioner from the two diagonal blocks of `A`.
pub fn build_block_preconditioner(
    m_c: &SparseSymMatrix,
    m_0: &SparseSymMatrix,
    mode: PrecondMode,
) -> Result<BlockPreconditioner> {
    let (n_cont, n_const) = (m_c.dim(), m_0.dim());
    let blocks = match mode {
        PrecondMode::ExactBlock => Blocks::Exact {
            c: factorize_spd(m_c)?,
            z: factorize_spd(m_0)?,
        },
        PrecondMode::JacobiBlock => {
            let mut inv_diag = Vec::with_capacity(n_cont + n_const);
            for d in m_c.diagonal().into_iter().chain(m_0.diagonal()) {
                if !(d > 0.0) {
                    return Err(Error::NotSpd(format!("non-positive diagonal entry {d}")));
                }
                inv_diag.push(1.0 / d);
            }
            Blocks::Jacobi { inv_diag }
        }
        PrecondMode::None => Blocks::Identity,
    };
    Ok(BlockPreconditioner {
        mode,
        n_cont,
        n_const,
        blocks,
    })
}

impl Preconditioner for BlockPreconditioner {
    fn dim(&self) -> usize {
        self.n_cont + self.n_const
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        assert_eq!(r.len(), self.dim());
        assert_eq!(z.len(), self.dim());
        match &self.blocks {
            Blocks::Exact { c, z: c0 } => {
                z.copy_from_slice(r);
                let (zc, z0) = z.split_at_mut(self.n_cont);
                c.solve_in_place(zc);
                c0.solve_in_place(z0);
            }
            Blocks::Jacobi { inv_diag } => {
                for ((zi, ri), d) in z.iter_mut().zip(r).zip(inv_diag) {
                    *zi = ri * d;
                }
            }
            Blocks::Identity => z.copy_from_slice(r),
        }
    }
}
