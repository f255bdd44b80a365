//! Residual-type local indicators for an element-wise polynomial function.

use crate::assembly::{trace_data, ModelProblem};
use crate::error::Result;
use crate::mesh::TriMesh;
use crate::quadrature::{edge_rule, triangle_rule};
use crate::spaces::{shape_values, EGFunction, EGSpace, FiniteElementSpace, MAX_LOCAL_DOFS};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    /// `h_T ||f + div(kappa grad v)||_{0,T}` per cell.
    pub cell: Vec<f64>,
    /// `h_e^{1/2} ||[[kappa grad v]] . n||_{0,e}` per facet, zero on boundary facets.
    pub facet: Vec<f64>,
}

impl EstimatorReport {
    /// `(sum of all squared indicators)^(1/2)`.
    pub fn total(&self) -> f64 {
        self.cell
            .iter()
            .chain(&self.facet)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Physical Hessians of the local Lagrange basis (constant on each cell).
fn hessians(
    space: &EGSpace,
    grads_lambda: &[[f64; 2]; 3],
    out: &mut [[[f64; 2]; 2]; MAX_LOCAL_DOFS],
) {
    let outer = |a: [f64; 2], b: [f64; 2]| [[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]];
    *out = [[[0.0; 2]; 2]; MAX_LOCAL_DOFS];
    if space.degree() == 1 {
        return;
    }
    for i in 0..3 {
        let g = grads_lambda[i];
        let h = outer(g, g);
        for r in 0..2 {
            for c in 0..2 {
                out[i][r][c] = 4.0 * h[r][c];
            }
        }
        let (a, b) = (grads_lambda[(i + 1) % 3], grads_lambda[(i + 2) % 3]);
        let (ab, ba) = (outer(a, b), outer(b, a));
        for r in 0..2 {
            for c in 0..2 {
                out[3 + i][r][c] = 4.0 * (ab[r][c] + ba[r][c]);
            }
        }
    }
}

/// Local indicators of `v` (the constant part has no effect). Only the
/// interior facets carry a facet indicator.
pub fn residual_estimator(
    v: &EGFunction,
    space: &EGSpace,
    mesh: &TriMesh,
    problem: &ModelProblem,
) -> Result<EstimatorReport> {
    space.check_mesh(mesh)?;
    let k = space.degree();
    let nloc = space.cont.local_size();
    let cell_rule = triangle_rule(2 * k + 4)?;
    let facet_rule = edge_rule(2 * k + 2)?;
    let coeffs = &v.coeffs;

    let mut cell = Vec::with_capacity(mesh.num_cells());
    let mut phi = [0.0; MAX_LOCAL_DOFS];
    let mut hess = [[[0.0; 2]; 2]; MAX_LOCAL_DOFS];
    for c in 0..mesh.num_cells() {
        let geom = mesh.cell_geometry(c)?;
        let gl = [
            geom.push_gradient([-1.0, -1.0]),
            geom.push_gradient([1.0, 0.0]),
            geom.push_gradient([0.0, 1.0]),
        ];
        hessians(space, &gl, &mut hess);
        let dofs = space.cont.local_dofs(c);
        let div_kgrad: f64 = (0..nloc)
            .map(|l| coeffs[dofs[l]] * (problem.kappa0 * hess[l][0][0] + hess[l][1][1]))
            .sum();
        let mut sq = 0.0;
        for (&xh, &w) in cell_rule.points.iter().zip(&cell_rule.weights) {
            shape_values(k, xh, &mut phi);
            let r = (problem.f)(geom.map(xh)) + div_kgrad;
            sq += w * geom.abs_det() * r * r;
        }
        cell.push(mesh.cell_diameter(c) * sq.sqrt());
    }

    let mut facet = vec![0.0; mesh.num_facets()];
    for (f, ind) in facet.iter_mut().enumerate() {
        if !mesh.facet(f).is_interior() {
            continue;
        }
        let tr = trace_data(mesh, space, f, &facet_rule)?;
        let minus = tr.minus.as_ref().expect("interior facet has two cells");
        let n = tr.normal;
        let mut sq = 0.0;
        for q in 0..tr.weights.len() {
            let mut jump = 0.0;
            for (side, sign) in [(&tr.plus, 1.0), (minus, -1.0)] {
                let mut g = [0.0; 2];
                for l in 0..nloc {
                    g[0] += coeffs[side.dofs[l]] * side.grads[q][l][0];
                    g[1] += coeffs[side.dofs[l]] * side.grads[q][l][1];
                }
                let kg = problem.kappa_grad(g);
                jump += sign * (kg[0] * n[0] + kg[1] * n[1]);
            }
            sq += tr.weights[q] * jump * jump;
        }
        *ind = tr.length.sqrt() * sq.sqrt();
    }
    Ok(EstimatorReport { cell, facet })
}
