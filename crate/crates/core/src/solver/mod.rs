//! Preconditioned MinRes with the block-diagonal preconditioner, and a
//! spectral-equivalence verifier for the preconditioner form.

pub mod factor;
pub mod minres;
pub mod precond;
pub mod refine;
pub mod spectral;

pub use factor::{factorize_spd, SparseCholesky};
pub use minres::{minres, minres_singular, minres_with_guess, MinresOptions, SolveReport};
pub use precond::{build_block_preconditioner, BlockPreconditioner, PrecondMode, Preconditioner};
pub use refine::block_correction;
pub use spectral::{spectral_equivalence, EigenMethod, SpectralBounds, SpectralOptions};
