//! Assembly of the interior over-penalized EG bilinear form and load vector.
//!
//! For `kappa = diag(kappa0, 1)` and `kappa_n = kappa n . n` the form is
//!
//! ```text
//! a_h(v, w) = (kappa grad v, grad w)
//!           - <{kappa grad v}, [[w]]> - <[[v]], {kappa grad w}>      on E^0 and E^D
//!           + <gamma_int kappa_n h_e^(-1-alpha) [[v]], [[w]]>         on E^0
//!           + <gamma_bdy kappa_n h_e^(-1) [[v]], [[w]]>               on E^D
//! ```
//!
//! with Dirichlet data imposed weakly through the load vector. Continuous
//! dofs are shared between neighbouring cells, so on interior facets only
//! the cell constants carry a jump.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{CellGeometry, FacetClass, Point, TriMesh};
use crate::quadrature::{edge_rule, triangle_rule, EdgeRule, TriangleRule};
use crate::spaces::{shape_gradients, shape_values, EGSpace, MAX_LOCAL_DOFS};
use crate::sparse::{SparseSymMatrix, TripletBuilder};

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type RegionFn = Arc<dyn Fn(Point) -> bool + Send + Sync>;

/// `-div(kappa grad u) = f` with `kappa = diag(kappa0, 1)`.
#[derive(Clone)]
pub struct ModelProblem {
    pub kappa0: f64,
    pub f: ScalarFn,
    pub u_dirichlet: ScalarFn,
    /// Prescribed `kappa grad u . n` on the Neumann boundary.
    pub u_neumann: ScalarFn,
    pub dirichlet_region: RegionFn,
}

impl std::fmt::Debug for ModelProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelProblem")
            .field("kappa0", &self.kappa0)
            .finish_non_exhaustive()
    }
}

impl ModelProblem {
    /// Homogeneous pure Dirichlet problem with source `f`.
    pub fn new(kappa0: f64, f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(kappa0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kappa0 must be positive, got {kappa0}"
            )));
        }
        Ok(Self {
            kappa0,
            f: Arc::new(f),
            u_dirichlet: Arc::new(|_| 0.0),
            u_neumann: Arc::new(|_| 0.0),
            dirichlet_region: Arc::new(|_| true),
        })
    }

    pub fn with_dirichlet(mut self, g: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.u_dirichlet = Arc::new(g);
        self
    }

    pub fn with_neumann(mut self, g: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.u_neumann = Arc::new(g);
        self
    }

    pub fn with_dirichlet_region(
        mut self,
        r: impl Fn(Point) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.dirichlet_region = Arc::new(r);
        self
    }

    #[inline]
    pub fn kappa_grad(&self, g: [f64; 2]) -> [f64; 2] {
        [self.kappa0 * g[0], g[1]]
    }

    #[inline]
    pub fn kappa_n(&self, n: [f64; 2]) -> f64 {
        self.kappa0 * n[0] * n[0] + n[1] * n[1]
    }

    /// Applies the Dirichlet-region predicate to a mesh's boundary facets.
    pub fn classify(&self, mesh: TriMesh) -> TriMesh {
        let region = Arc::clone(&self.dirichlet_region);
        mesh.classify_facets(move |p| region(p))
    }
}

/// Penalty parameters. The interior and boundary `gamma` coincide unless a
/// split is requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    pub gamma_interior: f64,
    pub gamma_boundary: f64,
    pub alpha: f64,
}

impl PenaltyParams {
    pub const DEFAULT_GAMMA: f64 = 10.0;
    pub const DEFAULT_ALPHA: f64 = 1.0;

    pub fn new(gamma: f64, alpha: f64) -> Result<Self> {
        Self::split(gamma, gamma, alpha)
    }

    pub fn split(gamma_interior: f64, gamma_boundary: f64, alpha: f64) -> Result<Self> {
        if !(gamma_interior > 0.0) || !(gamma_boundary > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "penalty gamma must be positive (interior {gamma_interior}, boundary {gamma_boundary})"
            )));
        }
        if !(alpha >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be nonnegative, got {alpha}"
            )));
        }
        Ok(Self {
            gamma_interior,
            gamma_boundary,
            alpha,
        })
    }

    /// Interior penalty weight `gamma_int kappa_n h^(-1-alpha)`.
    #[inline]
    pub fn interior_weight(&self, kappa_n: f64, h: f64) -> f64 {
        self.gamma_interior * kappa_n * h.powf(-1.0 - self.alpha)
    }

    /// Dirichlet penalty weight `gamma_bdy kappa_n h^(-1)`.
    #[inline]
    pub fn boundary_weight(&self, kappa_n: f64, h: f64) -> f64 {
        self.gamma_boundary * kappa_n / h
    }
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self {
            gamma_interior: Self::DEFAULT_GAMMA,
            gamma_boundary: Self::DEFAULT_GAMMA,
            alpha: Self::DEFAULT_ALPHA,
        }
    }
}

/// Jump and average of a scalar trace. Interior: `[[q]] = q+ n+ + q- n-`
/// with `n- = -n+`, `{q} = (q+ + q-)/2`. Boundary: `[[q]] = q n`, `{q} = q`.
pub fn jump_avg(plus: f64, minus: Option<f64>, normal: [f64; 2]) -> ([f64; 2], f64) {
    match minus {
        Some(m) => {
            let d = plus - m;
            ([d * normal[0], d * normal[1]], 0.5 * (plus + m))
        }
        None => ([plus * normal[0], plus * normal[1]], plus),
    }
}

/// Vector counterpart: `[[q]] = q+ . n+ + q- . n-`, `{q} = (q+ + q-)/2`.
pub fn jump_avg_vector(
    plus: [f64; 2],
    minus: Option<[f64; 2]>,
    normal: [f64; 2],
) -> (f64, [f64; 2]) {
    match minus {
        Some(m) => (
            (plus[0] - m[0]) * normal[0] + (plus[1] - m[1]) * normal[1],
            [0.5 * (plus[0] + m[0]), 0.5 * (plus[1] + m[1])],
        ),
        None => (plus[0] * normal[0] + plus[1] * normal[1], plus),
    }
}

/// Quadrature degrees used by assembly and postprocessing for degree `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyRules {
    /// Bilinear-form cell integrals, exact to `2k`.
    pub cell: TriangleRule,
    /// Load-vector and conservation cell integrals, exact to `2k + 2`.
    pub load: TriangleRule,
    /// Facet integrals, exact to `2k + 2`.
    pub edge: EdgeRule,
}

impl AssemblyRules {
    pub fn for_degree(k: usize) -> Result<Self> {
        Ok(Self {
            cell: triangle_rule(2 * k)?,
            load: triangle_rule(2 * k + 2)?,
            edge: edge_rule(2 * k + 2)?,
        })
    }
}

/// Trace of the local basis of one cell on a facet.
#[derive(Debug, Clone, PartialEq)]
pub struct SideTrace {
    pub cell: usize,
    /// Continuous dofs of the cell followed by its constant dof.
    pub dofs: Vec<usize>,
    /// `values[q][l]` for local dof `l` at facet point `q`.
    pub values: Vec<Vec<f64>>,
    /// Physical gradients, same layout.
    pub grads: Vec<Vec<[f64; 2]>>,
    pub geometry: CellGeometry,
}

/// Basis traces from both sides of a facet at the facet quadrature points.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceData {
    pub facet: usize,
    /// Parameters along the facet, from `endpoints[0]` to `endpoints[1]`.
    pub params: Vec<f64>,
    pub points: Vec<Point>,
    /// Quadrature weights times facet length.
    pub weights: Vec<f64>,
    pub normal: [f64; 2],
    pub length: f64,
    pub plus: SideTrace,
    pub minus: Option<SideTrace>,
}

/// Reference point on local facet `local` of the reference triangle at
/// parameter `t`, running from local vertex `local+1` to `local+2`.
pub fn reference_facet_point(local: usize, t: f64) -> Point {
    use crate::mesh::REFERENCE_VERTICES as V;
    let a = V[(local + 1) % 3];
    let b = V[(local + 2) % 3];
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn side_trace(
    mesh: &TriMesh,
    space: &EGSpace,
    cell: usize,
    facet: usize,
    params: &[f64],
) -> Result<SideTrace> {
    let geometry = mesh.cell_geometry(cell)?;
    let (local, flipped) = mesh.local_facet(cell, facet);
    let k = space.degree();
    let nloc = space.cont.local_size();
    let mut dofs: Vec<usize> =
        crate::spaces::FiniteElementSpace::local_dofs(&space.cont, cell).to_vec();
    dofs.push(space.const_dof(cell));
    let mut values = Vec::with_capacity(params.len());
    let mut grads = Vec::with_capacity(params.len());
    for &t in params {
        let s = if flipped { 1.0 - t } else { t };
        let xhat = reference_facet_point(local, s);
        let mut v = [0.0; MAX_LOCAL_DOFS];
        let mut g = [[0.0; 2]; MAX_LOCAL_DOFS];
        shape_values(k, xhat, &mut v);
        shape_gradients(k, xhat, &mut g);
        let mut vv: Vec<f64> = v[..nloc].to_vec();
        vv.push(1.0);
        let mut gg: Vec<[f64; 2]> = g[..nloc]
            .iter()
            .map(|&x| geometry.push_gradient(x))
            .collect();
        gg.push([0.0, 0.0]);
        values.push(vv);
        grads.push(gg);
    }
    Ok(SideTrace {
        cell,
        dofs,
        values,
        grads,
        geometry,
    })
}

/// Evaluates basis traces of both adjacent cells on facet `facet`.
pub fn trace_data(
    mesh: &TriMesh,
    space: &EGSpace,
    facet: usize,
    rule: &EdgeRule,
) -> Result<TraceData> {
    let rec = mesh.facet(facet);
    let params = rule.points.clone();
    let points = params.iter().map(|&t| mesh.facet_point(facet, t)).collect();
    let weights = rule.weights.iter().map(|w| w * rec.length).collect();
    let plus = side_trace(mesh, space, rec.cell_plus, facet, &params)?;
    let minus = match rec.cell_minus {
        Some(c) => Some(side_trace(mesh, space, c, facet, &params)?),
        None => None,
    };
    Ok(TraceData {
        facet,
        params,
        points,
        weights,
        normal: rec.normal,
        length: rec.length,
        plus,
        minus,
    })
}

/// Which part of the product space an assembly targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    /// The whole product space.
    Full,
    /// `a_h(v^c, w^c)` on the continuous factor.
    Continuous,
    /// `a_h(v^0, w^0)` on the piecewise-constant factor.
    Constant,
}

struct FilteredSink<'a> {
    builder: TripletBuilder,
    n_cont: usize,
    block: Block,
    _marker: std::marker::PhantomData<&'a ()>,
}

impl FilteredSink<'_> {
    #[inline]
    fn map(&self, d: usize) -> Option<usize> {
        match self.block {
            Block::Full => Some(d),
            Block::Continuous => (d < self.n_cont).then_some(d),
            Block::Constant => d.checked_sub(self.n_cont),
        }
    }

    #[inline]
    fn diag(&mut self, i: usize, v: f64) {
        if let Some(a) = self.map(i) {
            self.builder.push(a, a, v);
        }
    }

    /// Adds `v` at `(i, j)` and at `(j, i)`; on the diagonal that is `2v`.
    #[inline]
    fn pair(&mut self, i: usize, j: usize, v: f64) {
        if let (Some(a), Some(b)) = (self.map(i), self.map(j)) {
            self.builder.push(a, b, v);
            self.builder.push(b, a, v);
        }
    }
}

fn check_inputs(mesh: &TriMesh, space: &EGSpace) -> Result<()> {
    space.check_mesh(mesh)
}

/// Assembles the matrix of `a_h` on the product space.
pub fn assemble_matrix(
    mesh: &TriMesh,
    space: &EGSpace,
    problem: &ModelProblem,
    penalty: &PenaltyParams,
) -> Result<SparseSymMatrix> {
    assemble_form(mesh, space, problem, penalty, Block::Full)
}

/// Restriction of `a_h` to one factor space (`M_c` or `M_0`).
pub fn assemble_block(
    mesh: &TriMesh,
    space: &EGSpace,
    problem: &ModelProblem,
    penalty: &PenaltyParams,
    block: Block,
) -> Result<SparseSymMatrix> {
    assemble_form(mesh, space, problem, penalty, block)
}

fn assemble_form(
    mesh: &TriMesh,
    space: &EGSpace,
    problem: &ModelProblem,
    penalty: &PenaltyParams,
    block: Block,
) -> Result<SparseSymMatrix> {
    check_inputs(mesh, space)?;
    PenaltyParams::split(
        penalty.gamma_interior,
        penalty.gamma_boundary,
        penalty.alpha,
    )?;
    let k = space.degree();
    let rules = AssemblyRules::for_degree(k)?;
    let nloc = space.cont.local_size();
    let dim = match block {
        Block::Full => space.total_ndofs(),
        Block::Continuous => space.n_cont(),
        Block::Constant => space.n_const(),
    };
    let mut sink = FilteredSink {
        builder: TripletBuilder::with_capacity(dim, mesh.num_cells() * (nloc * nloc + 8 * nloc)),
        n_cont: space.n_cont(),
        block,
        _marker: std::marker::PhantomData,
    };

    // Volume terms.
    let nq = rules.cell.len();
    let mut ref_grads = vec![[[0.0; 2]; MAX_LOCAL_DOFS]; nq];
    for (q, &x) in rules.cell.points.iter().enumerate() {
        shape_gradients(k, x, &mut ref_grads[q]);
    }
    if block != Block::Constant {
        let mut phys = [[0.0; 2]; MAX_LOCAL_DOFS];
        for c in 0..mesh.num_cells() {
            let geom = mesh.cell_geometry(c)?;
            let dofs = crate::spaces::FiniteElementSpace::local_dofs(&space.cont, c);
            let mut local = [[0.0; MAX_LOCAL_DOFS]; MAX_LOCAL_DOFS];
            for q in 0..nq {
                let w = rules.cell.weights[q] * geom.abs_det();
                for l in 0..nloc {
                    phys[l] = geom.push_gradient(ref_grads[q][l]);
                }
                for i in 0..nloc {
                    let kg = problem.kappa_grad(phys[i]);
                    for j in i..nloc {
                        local[i][j] += w * (kg[0] * phys[j][0] + kg[1] * phys[j][1]);
                    }
                }
            }
            for i in 0..nloc {
                sink.diag(dofs[i], local[i][i]);
                for j in i + 1..nloc {
                    sink.pair(dofs[i], dofs[j], local[i][j]);
                }
            }
        }
    }

    // Facet terms.
    let mut avg: Vec<(usize, f64)> = Vec::with_capacity(2 * MAX_LOCAL_DOFS);
    let mut jump: Vec<(usize, f64)> = Vec::with_capacity(MAX_LOCAL_DOFS + 1);
    for f in 0..mesh.num_facets() {
        let rec = mesh.facet(f);
        if rec.class == FacetClass::Neumann {
            continue;
        }
        let tr = trace_data(mesh, space, f, &rules.edge)?;
        let n = tr.normal;
        let kn = problem.kappa_n(n);
        for q in 0..tr.weights.len() {
            let w = tr.weights[q];
            avg.clear();
            jump.clear();
            let sigma = match &tr.minus {
                Some(minus) => {
                    for side in [&tr.plus, minus] {
                        for l in 0..nloc {
                            let kg = problem.kappa_grad(side.grads[q][l]);
                            avg.push((side.dofs[l], 0.5 * (kg[0] * n[0] + kg[1] * n[1])));
                        }
                    }
                    jump.push((tr.plus.dofs[nloc], 1.0));
                    jump.push((minus.dofs[nloc], -1.0));
                    penalty.interior_weight(kn, tr.length)
                }
                None => {
                    let side = &tr.plus;
                    for l in 0..nloc {
                        let kg = problem.kappa_grad(side.grads[q][l]);
                        avg.push((side.dofs[l], kg[0] * n[0] + kg[1] * n[1]));
                    }
                    for l in 0..=nloc {
                        jump.push((side.dofs[l], side.values[q][l]));
                    }
                    penalty.boundary_weight(kn, tr.length)
                }
            };
            // -<{kappa grad v}, [[w]]> - <[[v]], {kappa grad w}>
            for &(i, a) in &avg {
                for &(j, b) in &jump {
                    sink.pair(i, j, -w * a * b);
                }
            }
            // penalty
            for (p, &(i, a)) in jump.iter().enumerate() {
                sink.diag(i, w * sigma * a * a);
                for &(j, b) in &jump[p + 1..] {
                    sink.pair(i, j, w * sigma * a * b);
                }
            }
        }
    }
    Ok(sink.builder.build())
}

/// Assembles the load vector
/// `F(v) = (f, v) + <u_N, v>_N - <u_D, kappa grad v . n>_D + <gamma_bdy kappa_n h^-1 u_D, v>_D`.
pub fn assemble_rhs(
    mesh: &TriMesh,
    space: &EGSpace,
    problem: &ModelProblem,
    penalty: &PenaltyParams,
) -> Result<Vec<f64>> {
    check_inputs(mesh, space)?;
    let k = space.degree();
    let rules = AssemblyRules::for_degree(k)?;
    let nloc = space.cont.local_size();
    let mut b = vec![0.0; space.total_ndofs()];

    let mut phi = vec![[0.0; MAX_LOCAL_DOFS]; rules.load.len()];
    for (q, &x) in rules.load.points.iter().enumerate() {
        shape_values(k, x, &mut phi[q]);
    }
    for c in 0..mesh.num_cells() {
        let geom = mesh.cell_geometry(c)?;
        let dofs = crate::spaces::FiniteElementSpace::local_dofs(&space.cont, c);
        let mut cell_total = 0.0;
        for (q, &x) in rules.load.points.iter().enumerate() {
            let wf = rules.load.weights[q] * geom.abs_det() * (problem.f)(geom.map(x));
            for l in 0..nloc {
                b[dofs[l]] += wf * phi[q][l];
            }
            cell_total += wf;
        }
        b[space.const_dof(c)] += cell_total;
    }

    for f in 0..mesh.num_facets() {
        let rec = mesh.facet(f);
        match rec.class {
            FacetClass::Interior => {}
            FacetClass::Neumann => {
                let tr = trace_data(mesh, space, f, &rules.edge)?;
                for q in 0..tr.weights.len() {
                    let g = tr.weights[q] * (problem.u_neumann)(tr.points[q]);
                    for l in 0..=nloc {
                        b[tr.plus.dofs[l]] += g * tr.plus.values[q][l];
                    }
                }
            }
            FacetClass::Dirichlet => {
                let tr = trace_data(mesh, space, f, &rules.edge)?;
                let n = tr.normal;
                let sigma = penalty.boundary_weight(problem.kappa_n(n), tr.length);
                for q in 0..tr.weights.len() {
                    let ud = (problem.u_dirichlet)(tr.points[q]);
                    if ud == 0.0 {
                        continue;
                    }
                    let w = tr.weights[q] * ud;
                    for l in 0..=nloc {
                        let kg = problem.kappa_grad(tr.plus.grads[q][l]);
                        let flux = kg[0] * n[0] + kg[1] * n[1];
                        b[tr.plus.dofs[l]] += w * (sigma * tr.plus.values[q][l] - flux);
                    }
                }
            }
        }
    }
    Ok(b)
}

/// `(f, 1_T)` for every cell with the load quadrature, i.e. exactly the
/// cell-constant entries of the load vector when the boundary data vanish
/// on that cell.
pub fn cell_source_integrals(
    mesh: &TriMesh,
    problem: &ModelProblem,
    rules: &AssemblyRules,
) -> Result<Vec<f64>> {
    (0..mesh.num_cells())
        .map(|c| {
            let geom = mesh.cell_geometry(c)?;
            Ok(rules
                .load
                .points
                .iter()
                .zip(&rules.load.weights)
                .map(|(&x, w)| w * geom.abs_det() * (problem.f)(geom.map(x)))
                .sum())
        })
        .collect()
}
