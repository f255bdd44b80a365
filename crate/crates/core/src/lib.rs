//! Interior over-penalized enriched Galerkin (IOP-EG) discretization of
//! `-div(kappa grad u) = f` on the unit square.
pub mod assembly;
pub mod error;
pub mod mesh;
pub mod postprocess;
pub mod quadrature;
pub mod solver;
pub mod spaces;
pub mod sparse;
pub mod study;

pub use assembly::{
    assemble_block, assemble_matrix, assemble_rhs, Block, ModelProblem, PenaltyParams,
};
pub use error::{Error, Result};
pub use mesh::{build_structured_mesh, FacetClass, Point, TriMesh};
pub use postprocess::{error_norms, recover_flux, ErrorReport, ExactSolution, RTNFlux};
pub use solver::{build_block_preconditioner, minres, MinresOptions, PrecondMode, SolveReport};
pub use spaces::{EGFunction, EGSpace, FiniteElementSpace};
pub use sparse::SparseSymMatrix;
pub use study::{Manufactured, StudyConfig, StudyKind, StudyRow};
