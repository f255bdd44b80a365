//! Shared fixtures for the benchmarks.

use iopeg_core::assembly::{ModelProblem, PenaltyParams};
use iopeg_core::mesh::TriMesh;
use iopeg_core::spaces::EGSpace;
use iopeg_core::study::Manufactured;

pub struct Fixture {
    pub mesh: TriMesh,
    pub space: EGSpace,
    pub problem: ModelProblem,
    pub penalty: PenaltyParams,
}

/// Manufactured problem with `kappa0 = 10`, `gamma = 10`, `alpha = 1`.
pub fn fixture(n: usize, k: usize) -> Fixture {
    let mesh = TriMesh::structured(n).unwrap();
    let space = EGSpace::new(&mesh, k).unwrap();
    Fixture {
        mesh,
        space,
        problem: Manufactured { kappa0: 10.0 }.problem().unwrap(),
        penalty: PenaltyParams::default(),
    }
}
