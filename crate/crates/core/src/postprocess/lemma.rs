//! Single-cell correction of a piecewise-constant function toward its
//! neighbour average, and the boundedness ratio it is used in.

use crate::assembly::{assemble_block, Block, ModelProblem, PenaltyParams};
use crate::error::{Error, Result};
use crate::mesh::{FacetClass, TriMesh};
use crate::spaces::EGSpace;

/// `phi` supported on `cell`, with value `(1/(N+1)) sum_{i=0..N} (p_i - p_0)`
/// where `p_0` is the value of `v0` on `cell` and `p_1..p_N` its values on
/// the `N` cells sharing at least one vertex with `cell`.
pub fn phi_construct(v0: &[f64], cell: usize, mesh: &TriMesh) -> Result<Vec<f64>> {
    if v0.len() != mesh.num_cells() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_cells(),
            got: v0.len(),
        });
    }
    let neighbors: Vec<f64> = mesh.vertex_neighbors(cell).iter().map(|&t| v0[t]).collect();
    let mut phi = vec![0.0; v0.len()];
    phi[cell] = phi_value(v0[cell], &neighbors);
    Ok(phi)
}

/// `(1/(N+1)) sum_{i=1..N} (p_i - p_0)` for neighbour values `p_1..p_N`.
pub fn phi_value(p0: f64, neighbors: &[f64]) -> f64 {
    neighbors.iter().map(|p| p - p0).sum::<f64>() / (neighbors.len() + 1) as f64
}

/// Cells with at least one Dirichlet facet.
pub fn dirichlet_cells(mesh: &TriMesh) -> Vec<usize> {
    (0..mesh.num_cells())
        .filter(|&c| {
            mesh.cell_facets(c)
                .iter()
                .any(|&f| mesh.facet(f).class == FacetClass::Dirichlet)
        })
        .collect()
}

/// `|||v̄0||| / ||v0||_{a_h,0}` with `v̄0 = sum over Dirichlet cells of phi`.
/// The numerator is the constant-block form, the denominator the interior
/// penalty part of `a_h(v0, v0)`.
pub fn lemma_ratio(
    v0: &[f64],
    mesh: &TriMesh,
    problem: &ModelProblem,
    penalty: &PenaltyParams,
) -> Result<f64> {
    let space = EGSpace::new(mesh, 1)?;
    let m0 = assemble_block(mesh, &space, problem, penalty, Block::Constant)?;
    lemma_ratio_with_block(v0, mesh, &m0, problem, penalty)
}

/// As [`lemma_ratio`] with a preassembled constant block.
pub fn lemma_ratio_with_block(
    v0: &[f64],
    mesh: &TriMesh,
    m0: &crate::sparse::SparseSymMatrix,
    problem: &ModelProblem,
    penalty: &PenaltyParams,
) -> Result<f64> {
    let mut vbar = vec![0.0; mesh.num_cells()];
    for c in dirichlet_cells(mesh) {
        let phi = phi_construct(v0, c, mesh)?;
        vbar[c] += phi[c];
    }
    let num = m0.bilinear(&vbar, &vbar).sqrt();
    let mut den = 0.0;
    for rec in mesh.facets() {
        if let Some(cm) = rec.cell_minus {
            let jump = v0[rec.cell_plus] - v0[cm];
            den += penalty.interior_weight(problem.kappa_n(rec.normal), rec.length)
                * rec.length
                * jump
                * jump;
        }
    }
    Ok(num / den.sqrt())
}
