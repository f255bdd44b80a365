//! Term-by-term quadrature oracle for the bilinear form, evaluated from
//! physical points mapped back into each adjacent cell.
#![allow(dead_code)]

use std::collections::BTreeMap;

use iopeg_core::mesh::{FacetClass, Point, TriMesh};
use iopeg_core::quadrature::{edge_rule, triangle_rule};
use iopeg_core::spaces::{shape_gradients, shape_values, EGSpace, FiniteElementSpace};
use iopeg_core::sparse::{SparseSymMatrix, TripletBuilder};

pub const ORACLE_DEGREE: usize = 8;

/// The three parts of the form: volume `(kappa grad v, grad w)`, the
/// symmetrized consistency `<{kappa grad v}.n, [[w]]> + <{kappa grad w}.n, [[v]]>`,
/// and the penalty.
pub struct OracleTerms {
    pub volume: SparseSymMatrix,
    pub consistency: SparseSymMatrix,
    pub penalty: SparseSymMatrix,
}

impl OracleTerms {
    /// `volume - consistency + penalty`.
    pub fn form(&self) -> Vec<Vec<f64>> {
        let (v, c, p) = (
            self.volume.to_dense(),
            self.consistency.to_dense(),
            self.penalty.to_dense(),
        );
        v.iter()
            .zip(&c)
            .zip(&p)
            .map(|((vr, cr), pr)| {
                vr.iter()
                    .zip(cr)
                    .zip(pr)
                    .map(|((a, b), c)| a - b + c)
                    .collect()
            })
            .collect()
    }

    pub fn form_sparse(&self) -> SparseSymMatrix {
        sum_sparse(&[
            (&self.volume, 1.0),
            (&self.consistency, -1.0),
            (&self.penalty, 1.0),
        ])
    }

    /// `volume + penalty`: the energy norm matrix.
    pub fn norm_sparse(&self) -> SparseSymMatrix {
        sum_sparse(&[(&self.volume, 1.0), (&self.penalty, 1.0)])
    }
}

pub fn sum_sparse(parts: &[(&SparseSymMatrix, f64)]) -> SparseSymMatrix {
    let n = parts[0].0.dim();
    let mut b = TripletBuilder::new(n);
    for (m, s) in parts {
        for i in 0..n {
            for (j, v) in m.row(i) {
                b.push(i, j, s * v);
            }
        }
    }
    b.build()
}

/// Value and physical gradient of every basis function living on `cell`
/// at the physical point `x`.
fn cell_basis(
    space: &EGSpace,
    mesh: &TriMesh,
    cell: usize,
    x: Point,
) -> Vec<(usize, f64, [f64; 2])> {
    let geom = mesh.cell_geometry(cell).unwrap();
    let xhat = geom.inverse_map(x);
    let k = space.degree();
    let mut vals = [0.0; 6];
    let mut grads = [[0.0; 2]; 6];
    shape_values(k, xhat, &mut vals);
    shape_gradients(k, xhat, &mut grads);
    let mut out: Vec<(usize, f64, [f64; 2])> = space
        .cont
        .local_dofs(cell)
        .iter()
        .enumerate()
        .map(|(l, &d)| (d, vals[l], geom.push_gradient(grads[l])))
        .collect();
    out.push((space.const_dof(cell), 1.0, [0.0, 0.0]));
    out
}

fn outward_normal(mesh: &TriMesh, cell: usize, a: Point, b: Point) -> [f64; 2] {
    let t = [b[0] - a[0], b[1] - a[1]];
    let len = t[0].hypot(t[1]);
    let mut n = [t[1] / len, -t[0] / len];
    let c = mesh.cell_centroid(cell);
    let m = [0.5 * (a[0] + b[0]) - c[0], 0.5 * (a[1] + b[1]) - c[1]];
    if n[0] * m[0] + n[1] * m[1] < 0.0 {
        n = [-n[0], -n[1]];
    }
    n
}

/// Per-dof (jump, normal average of kappa grad) at one facet point.
#[derive(Default, Clone, Copy)]
struct FacetEval {
    jump: f64,
    avg_flux: f64,
}

pub fn oracle_terms(
    mesh: &TriMesh,
    space: &EGSpace,
    kappa0: f64,
    gamma_int: f64,
    gamma_bdy: f64,
    alpha: f64,
) -> OracleTerms {
    let n = space.total_ndofs();
    let tri = triangle_rule(ORACLE_DEGREE).unwrap();
    let edge = edge_rule(ORACLE_DEGREE).unwrap();
    let kgrad = |g: [f64; 2]| [kappa0 * g[0], g[1]];

    let mut vol = TripletBuilder::new(n);
    for c in 0..mesh.num_cells() {
        let geom = mesh.cell_geometry(c).unwrap();
        for (&xh, &w) in tri.points.iter().zip(&tri.weights) {
            let x = geom.map(xh);
            let basis = cell_basis(space, mesh, c, x);
            for &(i, _, gi) in &basis {
                let kg = kgrad(gi);
                for &(j, _, gj) in &basis {
                    vol.push(i, j, w * geom.abs_det() * (kg[0] * gj[0] + kg[1] * gj[1]));
                }
            }
        }
    }

    let mut cons = TripletBuilder::new(n);
    let mut pen = TripletBuilder::new(n);
    let verts = mesh.vertices();
    for rec in mesh.facets() {
        if rec.class == FacetClass::Neumann {
            continue;
        }
        let (a, b) = (verts[rec.endpoints[0]], verts[rec.endpoints[1]]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let nrm = outward_normal(mesh, rec.cell_plus, a, b);
        let kn = kappa0 * nrm[0] * nrm[0] + nrm[1] * nrm[1];
        let sigma = match rec.class {
            FacetClass::Interior => gamma_int * kn * len.powf(-1.0 - alpha),
            _ => gamma_bdy * kn / len,
        };
        for (&t, &w) in edge.points.iter().zip(&edge.weights) {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let wq = w * len;
            let mut ev: BTreeMap<usize, FacetEval> = BTreeMap::new();
            let sides: Vec<(usize, f64)> = match rec.cell_minus {
                Some(m) => vec![(rec.cell_plus, 1.0), (m, -1.0)],
                None => vec![(rec.cell_plus, 1.0)],
            };
            let avg_w = if sides.len() == 2 { 0.5 } else { 1.0 };
            for &(cell, sign) in &sides {
                for (d, v, g) in cell_basis(space, mesh, cell, x) {
                    let e = ev.entry(d).or_default();
                    e.jump += sign * v;
                    let kg = kgrad(g);
                    e.avg_flux += avg_w * (kg[0] * nrm[0] + kg[1] * nrm[1]);
                }
            }
            for (&i, ei) in &ev {
                for (&j, ej) in &ev {
                    cons.push(i, j, wq * (ei.avg_flux * ej.jump + ej.avg_flux * ei.jump));
                    pen.push(i, j, wq * sigma * ei.jump * ej.jump);
                }
            }
        }
    }
    OracleTerms {
        volume: vol.build(),
        consistency: cons.build(),
        penalty: pen.build(),
    }
}

/// Deterministic pseudo-random vector in `[-1, 1)`.
pub fn random_vector(len: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Removes the Euclidean component along `k`.
pub fn project_out(v: &mut [f64], k: &[f64]) {
    let c = v.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() / k.iter().map(|b| b * b).sum::<f64>();
    for (vi, ki) in v.iter_mut().zip(k) {
        *vi -= c * ki;
    }
}
