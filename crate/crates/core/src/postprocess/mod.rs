//! Flux recovery, conservation certificate, error norms and diagnostics.

pub mod errors;
pub mod estimator;
pub mod flux;
pub mod lemma;

pub use errors::{error_breakdown, error_norms, ErrorBreakdown, ErrorReport, ExactSolution};
pub use estimator::{residual_estimator, EstimatorReport};
pub use flux::{conservation_residual, recover_flux, RTNFlux};
pub use lemma::{dirichlet_cells, lemma_ratio, lemma_ratio_with_block, phi_construct, phi_value};
