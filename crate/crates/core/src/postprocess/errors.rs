//! Error norms against an exact solution.

use super::flux::{conservation_residual, recover_flux, RTNFlux};
use crate::assembly::{trace_data, ModelProblem, PenaltyParams};
use crate::error::Result;
use crate::mesh::{FacetClass, Point, TriMesh};
use crate::quadrature::{edge_rule, triangle_rule};
use crate::spaces::{EGFunction, EGSpace};

/// Exact solution and its gradient.
pub struct ExactSolution<'a> {
    pub u: &'a (dyn Fn(Point) -> f64 + Sync),
    pub grad: &'a (dyn Fn(Point) -> [f64; 2] + Sync),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// `||u - u_h||_0`.
    pub l2_error: f64,
    /// `||u - u_h||_{a_h}`: broken gradient plus penalty-weighted jumps.
    pub ah_error: f64,
    /// `||z - z_h||` for `z = -kappa grad u`.
    pub flux_error: f64,
    /// `||P_0(f - div z_h)||_0`.
    pub conservation_residual: f64,
    /// `|u_h^0|_{H^1_h}`, the interior jumps of the cell constants.
    pub interior_jump_seminorm: f64,
}

/// Squared error contributions under both weighting conventions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorBreakdown {
    pub l2_sq: f64,
    /// `(grad e, grad e)` broken.
    pub grad_sq: f64,
    /// `(kappa grad e, grad e)` broken.
    pub kappa_grad_sq: f64,
    /// Penalty terms of the error with `kappa_n = 1`.
    pub penalty_sq: f64,
    /// Penalty terms weighted by `kappa_n`.
    pub kappa_penalty_sq: f64,
    /// `(z - z_h, z - z_h)`.
    pub flux_l2_sq: f64,
    /// `(kappa^{-1}(z - z_h), z - z_h)`.
    pub flux_kappa_inv_sq: f64,
    pub jump_seminorm_sq: f64,
}

impl ErrorBreakdown {
    /// Energy error with the unweighted gradient and penalty.
    pub fn ah_unweighted(&self) -> f64 {
        (self.grad_sq + self.penalty_sq).sqrt()
    }

    /// Energy error with `kappa` in the gradient and `kappa_n` in the penalty.
    pub fn ah_kappa(&self) -> f64 {
        (self.kappa_grad_sq + self.kappa_penalty_sq).sqrt()
    }
}

/// Integrates all error contributions. Cell and facet integrals use rules
/// exact to degree `2k + 4`.
pub fn error_breakdown(
    u_h: &EGFunction,
    space: &EGSpace,
    mesh: &TriMesh,
    problem: &ModelProblem,
    penalty: &PenaltyParams,
    exact: &ExactSolution<'_>,
    z_h: &RTNFlux,
) -> Result<ErrorBreakdown> {
    space.check_mesh(mesh)?;
    let k = space.degree();
    let cell_rule = triangle_rule(2 * k + 4)?;
    let facet_rule = edge_rule(2 * k + 4)?;
    let nloc = space.cont.local_size();
    let u = &u_h.coeffs;
    let mut out = ErrorBreakdown::default();

    for c in 0..mesh.num_cells() {
        let geom = mesh.cell_geometry(c)?;
        for (&xh, &w) in cell_rule.points.iter().zip(&cell_rule.weights) {
            let x = geom.map(xh);
            let wq = w * geom.abs_det();
            let e = (exact.u)(x) - u_h.value(space, c, xh);
            let gu = (exact.grad)(x);
            let gh = u_h.gradient(space, mesh, c, xh);
            let ge = [gu[0] - gh[0], gu[1] - gh[1]];
            out.l2_sq += wq * e * e;
            out.grad_sq += wq * (ge[0] * ge[0] + ge[1] * ge[1]);
            out.kappa_grad_sq += wq * (problem.kappa0 * ge[0] * ge[0] + ge[1] * ge[1]);
            let z = problem.kappa_grad(gu);
            let zh = z_h.eval(c, x);
            let d = [-z[0] - zh[0], -z[1] - zh[1]];
            out.flux_l2_sq += wq * (d[0] * d[0] + d[1] * d[1]);
            out.flux_kappa_inv_sq += wq * (d[0] * d[0] / problem.kappa0 + d[1] * d[1]);
        }
    }

    for f in 0..mesh.num_facets() {
        let rec = mesh.facet(f);
        let kn = problem.kappa_n(rec.normal);
        match rec.class {
            FacetClass::Interior => {
                let minus = rec.cell_minus.expect("interior facet has two cells");
                let jump = u[space.const_dof(rec.cell_plus)] - u[space.const_dof(minus)];
                let sq = rec.length * jump * jump;
                let sigma = penalty.interior_weight(1.0, rec.length);
                out.penalty_sq += sigma * sq;
                out.kappa_penalty_sq += sigma * kn * sq;
                out.jump_seminorm_sq += sq / rec.length;
            }
            FacetClass::Dirichlet => {
                let tr = trace_data(mesh, space, f, &facet_rule)?;
                let mut sq = 0.0;
                for q in 0..tr.weights.len() {
                    let vh: f64 = (0..=nloc)
                        .map(|l| u[tr.plus.dofs[l]] * tr.plus.values[q][l])
                        .sum();
                    let e = (exact.u)(tr.points[q]) - vh;
                    sq += tr.weights[q] * e * e;
                }
                let sigma = penalty.boundary_weight(1.0, rec.length);
                out.penalty_sq += sigma * sq;
                out.kappa_penalty_sq += sigma * kn * sq;
            }
            FacetClass::Neumann => {}
        }
    }
    Ok(out)
}

/// Recovers the flux and evaluates every field of the report.
///
/// The energy error uses the unweighted gradient and penalty terms and the
/// flux error is the plain `L^2` norm of `z - z_h`; both coincide with the
/// `kappa`-weighted variants when `kappa0 = 1`. [`error_breakdown`] exposes
/// the weighted variants.
pub fn error_norms(
    u_h: &EGFunction,
    space: &EGSpace,
    mesh: &TriMesh,
    problem: &ModelProblem,
    penalty: &PenaltyParams,
    exact: &ExactSolution<'_>,
) -> Result<(ErrorReport, RTNFlux)> {
    let z_h = recover_flux(u_h, space, mesh, problem, penalty)?;
    let b = error_breakdown(u_h, space, mesh, problem, penalty, exact, &z_h)?;
    let (_, cons) = conservation_residual(&z_h, problem, mesh)?;
    Ok((
        ErrorReport {
            l2_error: b.l2_sq.sqrt(),
            ah_error: b.ah_unweighted(),
            flux_error: b.flux_l2_sq.sqrt(),
            conservation_residual: cons,
            interior_jump_seminorm: b.jump_seminorm_sq.sqrt(),
        },
        z_h,
    ))
}
