//! Recovery of a locally conservative flux in the Raviart-Thomas-Nedelec
//! space of order `k`, and the conservation certificate.
//!
//! Degrees of freedom are the facet moments `<z . n+, q>_e` for `q` in
//! `P_{k-1}(e)` (basis `1` and, for `k = 2`, `2t - 1` along the facet) and,
//! for `k = 2`, the cell moments `(z, e_i)_T`. On each cell the flux is
//! stored in a local monomial basis in `xi = (x - centroid) / h_T`:
//!
//! ```text
//! k = 1: (1,0), (0,1), (xi1, xi2)
//! k = 2: (1,0), (0,1), (xi1,0), (xi2,0), (0,xi1), (0,xi2), (xi1^2, xi1 xi2), (xi1 xi2, xi2^2)
//! ```

use faer::linalg::solvers::Solve;
use faer::{Mat, MatMut};

use crate::assembly::{trace_data, AssemblyRules, ModelProblem, PenaltyParams};
use crate::error::{Error, Result};
use crate::mesh::{FacetClass, Point, TriMesh};
use crate::spaces::{EGFunction, EGSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct RTNFlux {
    degree: usize,
    /// `facet_moments[k * f + j]` is the `j`-th moment on facet `f`.
    facet_moments: Vec<f64>,
    /// `(z, e_1)_T` and `(z, e_2)_T` per cell; empty for `k = 1`.
    cell_moments: Vec<[f64; 2]>,
    /// Local basis coefficients per cell.
    coeffs: Vec<Vec<f64>>,
    centroids: Vec<Point>,
    scales: Vec<f64>,
}

#[inline]
fn facet_test(j: usize, t: f64) -> f64 {
    match j {
        0 => 1.0,
        _ => 2.0 * t - 1.0,
    }
}

fn local_dim(k: usize) -> usize {
    if k == 1 {
        3
    } else {
        8
    }
}

/// Local basis values at `xi`.
fn basis(k: usize, xi: Point, out: &mut [[f64; 2]; 8]) {
    let [a, b] = xi;
    out[0] = [1.0, 0.0];
    out[1] = [0.0, 1.0];
    if k == 1 {
        out[2] = [a, b];
    } else {
        out[2] = [a, 0.0];
        out[3] = [b, 0.0];
        out[4] = [0.0, a];
        out[5] = [0.0, b];
        out[6] = [a * a, a * b];
        out[7] = [a * b, b * b];
    }
}

/// Divergences with respect to `xi`.
fn basis_div(k: usize, xi: Point, out: &mut [f64; 8]) {
    *out = [0.0; 8];
    if k == 1 {
        out[2] = 2.0;
    } else {
        out[2] = 1.0;
        out[5] = 1.0;
        out[6] = 3.0 * xi[0];
        out[7] = 3.0 * xi[1];
    }
}

impl RTNFlux {
    /// Builds the flux from its moments by solving the local moment systems.
    pub fn from_moments(
        mesh: &TriMesh,
        degree: usize,
        facet_moments: Vec<f64>,
        cell_moments: Vec<[f64; 2]>,
    ) -> Result<Self> {
        if degree != 1 && degree != 2 {
            return Err(Error::InvalidArgument(format!(
                "RTN degree must be 1 or 2, got {degree}"
            )));
        }
        if facet_moments.len() != degree * mesh.num_facets() {
            return Err(Error::DimensionMismatch {
                expected: degree * mesh.num_facets(),
                got: facet_moments.len(),
            });
        }
        let expected_cells = if degree == 2 { mesh.num_cells() } else { 0 };
        if cell_moments.len() != expected_cells {
            return Err(Error::DimensionMismatch {
                expected: expected_cells,
                got: cell_moments.len(),
            });
        }
        let rules = AssemblyRules::for_degree(degree)?;
        let nd = local_dim(degree);
        let mut coeffs = Vec::with_capacity(mesh.num_cells());
        let mut centroids = Vec::with_capacity(mesh.num_cells());
        let mut scales = Vec::with_capacity(mesh.num_cells());
        let mut psi = [[0.0; 2]; 8];
        for c in 0..mesh.num_cells() {
            let xc = mesh.cell_centroid(c);
            let h = mesh.cell_diameter(c);
            let to_xi = |x: Point| [(x[0] - xc[0]) / h, (x[1] - xc[1]) / h];
            let mut d = Mat::<f64>::zeros(nd, nd);
            let mut rhs = vec![0.0; nd];
            let mut row = 0;
            for f in mesh.cell_facets(c) {
                let rec = mesh.facet(f);
                for j in 0..degree {
                    for (&t, &w) in rules.edge.points.iter().zip(&rules.edge.weights) {
                        basis(degree, to_xi(mesh.facet_point(f, t)), &mut psi);
                        let wq = w * rec.length * facet_test(j, t);
                        for i in 0..nd {
                            d[(row, i)] +=
                                wq * (psi[i][0] * rec.normal[0] + psi[i][1] * rec.normal[1]);
                        }
                    }
                    rhs[row] = facet_moments[degree * f + j];
                    row += 1;
                }
            }
            if degree == 2 {
                let geom = mesh.cell_geometry(c)?;
                for (&x, &w) in rules.load.points.iter().zip(&rules.load.weights) {
                    basis(degree, to_xi(geom.map(x)), &mut psi);
                    let wq = w * geom.abs_det();
                    for i in 0..nd {
                        d[(row, i)] += wq * psi[i][0];
                        d[(row + 1, i)] += wq * psi[i][1];
                    }
                }
                rhs[row] = cell_moments[c][0];
                rhs[row + 1] = cell_moments[c][1];
            }
            let lu = d.partial_piv_lu();
            let mut sol = rhs.clone();
            lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut sol, nd, 1));
            // Reject a singular moment system through its residual.
            let mut worst = 0.0f64;
            let scale = rhs
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(f64::MIN_POSITIVE);
            for r in 0..nd {
                let ax: f64 = (0..nd).map(|i| d[(r, i)] * sol[i]).sum();
                worst = worst.max((ax - rhs[r]).abs());
            }
            if !sol.iter().all(|v| v.is_finite()) || worst > 1e-8 * scale {
                return Err(Error::SingularMomentSystem(c));
            }
            coeffs.push(sol);
            centroids.push(xc);
            scales.push(h);
        }
        Ok(Self {
            degree,
            facet_moments,
            cell_moments,
            coeffs,
            centroids,
            scales,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn facet_moments(&self) -> &[f64] {
        &self.facet_moments
    }

    pub fn cell_moments(&self) -> &[[f64; 2]] {
        &self.cell_moments
    }

    /// Value of `z_h` restricted to `cell` at physical point `x`.
    pub fn eval(&self, cell: usize, x: Point) -> [f64; 2] {
        let xc = self.centroids[cell];
        let h = self.scales[cell];
        let mut psi = [[0.0; 2]; 8];
        basis(
            self.degree,
            [(x[0] - xc[0]) / h, (x[1] - xc[1]) / h],
            &mut psi,
        );
        let mut z = [0.0; 2];
        for (c, p) in self.coeffs[cell].iter().zip(&psi) {
            z[0] += c * p[0];
            z[1] += c * p[1];
        }
        z
    }

    /// `div z_h` on `cell` at physical point `x`.
    pub fn divergence(&self, cell: usize, x: Point) -> f64 {
        let xc = self.centroids[cell];
        let h = self.scales[cell];
        let mut dv = [0.0; 8];
        basis_div(
            self.degree,
            [(x[0] - xc[0]) / h, (x[1] - xc[1]) / h],
            &mut dv,
        );
        self.coeffs[cell]
            .iter()
            .zip(&dv)
            .map(|(c, d)| c * d)
            .sum::<f64>()
            / h
    }

    /// `(div z_h, 1_T)`. The linear divergence terms integrate to zero
    /// because `xi` is centred at the centroid.
    pub fn cell_divergence_integral(&self, mesh: &TriMesh, cell: usize) -> f64 {
        let c = &self.coeffs[cell];
        let integrand = if self.degree == 1 {
            2.0 * c[2]
        } else {
            c[2] + c[5]
        };
        mesh.cell_area(cell) * integrand / self.scales[cell]
    }
}

/// Recovers `z_h` from a discrete solution.
pub fn recover_flux(
    u_h: &EGFunction,
    space: &EGSpace,
    mesh: &TriMesh,
    problem: &ModelProblem,
    penalty: &PenaltyParams,
) -> Result<RTNFlux> {
    space.check_mesh(mesh)?;
    if u_h.coeffs.len() != space.total_ndofs() {
        return Err(Error::DimensionMismatch {
            expected: space.total_ndofs(),
            got: u_h.coeffs.len(),
        });
    }
    let k = space.degree();
    let rules = AssemblyRules::for_degree(k)?;
    let nloc = space.cont.local_size();
    let u = &u_h.coeffs;
    let mut facet_moments = vec![0.0; k * mesh.num_facets()];

    for f in 0..mesh.num_facets() {
        let rec = mesh.facet(f);
        let tr = trace_data(mesh, space, f, &rules.edge)?;
        let n = tr.normal;
        let kn = problem.kappa_n(n);
        let flux_of = |side: &crate::assembly::SideTrace, q: usize| -> f64 {
            let mut g = [0.0; 2];
            for l in 0..nloc {
                g[0] += u[side.dofs[l]] * side.grads[q][l][0];
                g[1] += u[side.dofs[l]] * side.grads[q][l][1];
            }
            let kg = problem.kappa_grad(g);
            kg[0] * n[0] + kg[1] * n[1]
        };
        for q in 0..tr.weights.len() {
            let zn = match (rec.class, &tr.minus) {
                (FacetClass::Interior, Some(minus)) => {
                    let avg = 0.5 * (flux_of(&tr.plus, q) + flux_of(minus, q));
                    let jump = u[tr.plus.dofs[nloc]] - u[minus.dofs[nloc]];
                    -avg + penalty.interior_weight(kn, tr.length) * jump
                }
                (FacetClass::Dirichlet, _) => {
                    let value: f64 = (0..=nloc)
                        .map(|l| u[tr.plus.dofs[l]] * tr.plus.values[q][l])
                        .sum();
                    let ud = (problem.u_dirichlet)(tr.points[q]);
                    -flux_of(&tr.plus, q) + penalty.boundary_weight(kn, tr.length) * (value - ud)
                }
                _ => -(problem.u_neumann)(tr.points[q]),
            };
            for j in 0..k {
                facet_moments[k * f + j] += tr.weights[q] * zn * facet_test(j, tr.params[q]);
            }
        }
    }

    let mut cell_moments = Vec::new();
    if k == 2 {
        cell_moments.reserve(mesh.num_cells());
        for c in 0..mesh.num_cells() {
            let geom = mesh.cell_geometry(c)?;
            let mut m = [0.0; 2];
            for (&x, &w) in rules.load.points.iter().zip(&rules.load.weights) {
                let kg = problem.kappa_grad(u_h.gradient(space, mesh, c, x));
                m[0] -= w * geom.abs_det() * kg[0];
                m[1] -= w * geom.abs_det() * kg[1];
            }
            cell_moments.push(m);
        }
    }
    RTNFlux::from_moments(mesh, k, facet_moments, cell_moments)
}

/// Per-cell residuals `r_T = (f, 1_T) - (div z_h, 1_T)` and the global
/// value `||P_0(f - div z_h)||_0 = (sum_T r_T^2 / |T|)^(1/2)`. `(f, 1_T)`
/// uses the load-vector quadrature.
pub fn conservation_residual(
    z_h: &RTNFlux,
    problem: &ModelProblem,
    mesh: &TriMesh,
) -> Result<(Vec<f64>, f64)> {
    let rules = AssemblyRules::for_degree(z_h.degree())?;
    let sources = crate::assembly::cell_source_integrals(mesh, problem, &rules)?;
    let per_cell: Vec<f64> = sources
        .iter()
        .enumerate()
        .map(|(c, s)| s - z_h.cell_divergence_integral(mesh, c))
        .collect();
    let global = per_cell
        .iter()
        .enumerate()
        .map(|(c, r)| r * r / mesh.cell_area(c))
        .sum::<f64>()
        .sqrt();
    Ok((per_cell, global))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize, k: usize) -> (TriMesh, EGSpace) {
        let mesh = TriMesh::structured(n).unwrap();
        let space = EGSpace::new(&mesh, k).unwrap();
        (mesh, space)
    }

    #[test]
    fn zero_solution_zero_flux() {
        for k in [1, 2] {
            let (mesh, space) = setup(3, k);
            let p = ModelProblem::new(1.0, |_| 0.0).unwrap();
            let z = recover_flux(
                &EGFunction::zeros(&space),
                &space,
                &mesh,
                &p,
                &PenaltyParams::default(),
            )
            .unwrap();
            for c in 0..mesh.num_cells() {
                assert_eq!(z.eval(c, mesh.cell_centroid(c)), [0.0, 0.0]);
            }
        }
    }

    #[test]
    fn linear_solution_gives_constant_flux() {
        // u = x with u_D = x: jumps and Dirichlet mismatch vanish.
        for k in [1, 2] {
            let (mesh, space) = setup(4, k);
            let p = ModelProblem::new(1.0, |_| 0.0)
                .unwrap()
                .with_dirichlet(|x| x[0]);
            let u = EGFunction::from_continuous(&space, &mesh, &|x| x[0]);
            let z = recover_flux(&u, &space, &mesh, &p, &PenaltyParams::default()).unwrap();
            for c in 0..mesh.num_cells() {
                for xhat in [[0.2, 0.3], [0.0, 0.0], [0.5, 0.5]] {
                    let x = mesh.cell_geometry(c).unwrap().map(xhat);
                    let v = z.eval(c, x);
                    assert!(
                        (v[0] + 1.0).abs() < 1e-12 && v[1].abs() < 1e-12,
                        "k={k} cell {c}: {v:?}"
                    );
                }
                assert!(z.divergence(c, mesh.cell_centroid(c)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn normal_trace_is_continuous() {
        for k in [1, 2] {
            let (mesh, space) = setup(4, k);
            let p = ModelProblem::new(3.0, |x| x[0] * x[1]).unwrap();
            // An arbitrary discontinuous EG function.
            let coeffs: Vec<f64> = (0..space.total_ndofs())
                .map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0)
                .collect();
            let u = EGFunction::new(&space, coeffs).unwrap();
            let z = recover_flux(
                &u,
                &space,
                &mesh,
                &p,
                &PenaltyParams::new(10.0, 1.0).unwrap(),
            )
            .unwrap();
            for (f, rec) in mesh.facets().iter().enumerate() {
                let Some(cm) = rec.cell_minus else { continue };
                for t in [0.1, 0.5, 0.8] {
                    let x = mesh.facet_point(f, t);
                    let (a, b) = (z.eval(rec.cell_plus, x), z.eval(cm, x));
                    let jump = (a[0] - b[0]) * rec.normal[0] + (a[1] - b[1]) * rec.normal[1];
                    assert!(jump.abs() < 1e-11, "k={k} facet {f}: {jump:e}");
                }
            }
        }
    }

    #[test]
    fn moments_are_reproduced() {
        let (mesh, _) = setup(2, 2);
        let nf = mesh.num_facets();
        let fm: Vec<f64> = (0..2 * nf).map(|i| (i as f64 * 0.37).sin()).collect();
        let cm: Vec<[f64; 2]> = (0..mesh.num_cells())
            .map(|c| [c as f64 * 0.01, -0.02])
            .collect();
        let z = RTNFlux::from_moments(&mesh, 2, fm.clone(), cm).unwrap();
        let rule = crate::quadrature::edge_rule(6).unwrap();
        for f in 0..nf {
            let rec = mesh.facet(f);
            for j in 0..2 {
                let m: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&t, &w)| {
                        let v = z.eval(rec.cell_plus, mesh.facet_point(f, t));
                        w * rec.length
                            * (v[0] * rec.normal[0] + v[1] * rec.normal[1])
                            * facet_test(j, t)
                    })
                    .sum();
                assert!((m - fm[2 * f + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_flux_unit_source_residual_is_area() {
        let (mesh, _) = setup(3, 1);
        let z = RTNFlux::from_moments(&mesh, 1, vec![0.0; mesh.num_facets()], vec![]).unwrap();
        let p = ModelProblem::new(1.0, |_| 1.0).unwrap();
        let (r, g) = conservation_residual(&z, &p, &mesh).unwrap();
        for (c, rc) in r.iter().enumerate() {
            assert!((rc - mesh.cell_area(c)).abs() < 1e-15);
        }
        assert!((g - 1.0).abs() < 1e-13);
    }

    #[test]
    fn perturbing_one_moment_moves_two_residuals() {
        let (mesh, _) = setup(3, 2);
        let p = ModelProblem::new(1.0, |x| x[0] + 1.0).unwrap();
        let nf = mesh.num_facets();
        let fm: Vec<f64> = (0..2 * nf).map(|i| (i as f64).cos() * 0.01).collect();
        let cm = vec![[0.001, 0.002]; mesh.num_cells()];
        let base = RTNFlux::from_moments(&mesh, 2, fm.clone(), cm.clone()).unwrap();
        let (r0, _) = conservation_residual(&base, &p, &mesh).unwrap();
        let f = (0..nf).find(|&f| mesh.facet(f).is_interior()).unwrap();
        let delta = 0.125;
        let mut fm2 = fm;
        fm2[2 * f] += delta;
        // The second moment does not affect the divergence integral.
        fm2[2 * f + 1] += 3.0;
        let pert = RTNFlux::from_moments(&mesh, 2, fm2, cm).unwrap();
        let (r1, _) = conservation_residual(&pert, &p, &mesh).unwrap();
        let rec = mesh.facet(f);
        let minus = rec.cell_minus.unwrap();
        for c in 0..mesh.num_cells() {
            let expected = if c == rec.cell_plus {
                -delta
            } else if c == minus {
                delta
            } else {
                0.0
            };
            assert!((r1[c] - r0[c] - expected).abs() < 1e-12, "cell {c}");
        }
    }
}
