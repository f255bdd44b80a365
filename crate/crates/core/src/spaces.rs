//! Finite element spaces: continuous Lagrange `P1`/`P2`, piecewise constants,
//! and the enriched product space used by the EG discretization.
//!
//! Local `P2` numbering is vertices `0..3` followed by the edge nodes
//! `3..6`, where edge node `3 + i` sits on local facet `i` (opposite vertex
//! `i`). Global numbering puts every vertex first and then one dof per mesh
//! facet, so shared dofs coincide across cells by construction.

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};

/// Maximum number of local basis functions (P2).
pub const MAX_LOCAL_DOFS: usize = 6;

/// Common interface of the scalar spaces.
pub trait FiniteElementSpace {
    fn ndofs(&self) -> usize;
    fn local_dofs(&self, cell: usize) -> &[usize];
    /// Values of all local basis functions at a reference point.
    fn eval_basis(&self, cell: usize, xhat: Point) -> Vec<f64>;
    /// Physical gradients of all local basis functions at a reference point.
    fn eval_basis_grad(&self, mesh: &TriMesh, cell: usize, xhat: Point) -> Result<Vec<[f64; 2]>>;
    /// Coefficients of the nodal interpolant of `f`.
    fn interpolate(&self, mesh: &TriMesh, f: &dyn Fn(Point) -> f64) -> Vec<f64>;
}

/// Reference shape values for degree `k`, written into `out[..nloc]`.
#[inline]
pub fn shape_values(degree: usize, xhat: Point, out: &mut [f64]) {
    let l = barycentric(xhat);
    match degree {
        1 => out[..3].copy_from_slice(&l),
        2 => {
            for i in 0..3 {
                out[i] = l[i] * (2.0 * l[i] - 1.0);
            }
            for i in 0..3 {
                out[3 + i] = 4.0 * l[(i + 1) % 3] * l[(i + 2) % 3];
            }
        }
        _ => unreachable!("unsupported degree"),
    }
}

/// Reference gradients for degree `k`, written into `out[..nloc]`.
#[inline]
pub fn shape_gradients(degree: usize, xhat: Point, out: &mut [[f64; 2]]) {
    const GL: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    match degree {
        1 => out[..3].copy_from_slice(&GL),
        2 => {
            let l = barycentric(xhat);
            for i in 0..3 {
                let s = 4.0 * l[i] - 1.0;
                out[i] = [s * GL[i][0], s * GL[i][1]];
            }
            for i in 0..3 {
                let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                out[3 + i] = [
                    4.0 * (GL[a][0] * l[b] + l[a] * GL[b][0]),
                    4.0 * (GL[a][1] * l[b] + l[a] * GL[b][1]),
                ];
            }
        }
        _ => unreachable!("unsupported degree"),
    }
}

#[inline]
fn barycentric(x: Point) -> [f64; 3] {
    [1.0 - x[0] - x[1], x[0], x[1]]
}

/// Continuous Lagrange space of degree 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeSpace {
    degree: usize,
    ndofs: usize,
    nloc: usize,
    dof_map: Vec<usize>,
    /// Physical coordinates of every global node.
    nodes: Vec<Point>,
}

impl LagrangeSpace {
    pub fn new(mesh: &TriMesh, degree: usize) -> Result<Self> {
        let nv = mesh.num_vertices();
        let (nloc, ndofs) = match degree {
            1 => (3, nv),
            2 => (6, nv + mesh.num_facets()),
            k => {
                return Err(Error::InvalidArgument(format!(
                    "Lagrange degree must be 1 or 2, got {k}"
                )))
            }
        };
        let mut dof_map = Vec::with_capacity(nloc * mesh.num_cells());
        for c in 0..mesh.num_cells() {
            dof_map.extend_from_slice(&mesh.cells()[c]);
            if degree == 2 {
                dof_map.extend(mesh.cell_facets(c).iter().map(|&f| nv + f));
            }
        }
        let mut nodes = mesh.vertices().to_vec();
        if degree == 2 {
            nodes.extend((0..mesh.num_facets()).map(|f| mesh.facet_midpoint(f)));
        }
        Ok(Self {
            degree,
            ndofs,
            nloc,
            dof_map,
            nodes,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn local_size(&self) -> usize {
        self.nloc
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }
}

impl FiniteElementSpace for LagrangeSpace {
    fn ndofs(&self) -> usize {
        self.ndofs
    }

    fn local_dofs(&self, cell: usize) -> &[usize] {
        &self.dof_map[cell * self.nloc..(cell + 1) * self.nloc]
    }

    fn eval_basis(&self, _cell: usize, xhat: Point) -> Vec<f64> {
        let mut out = [0.0; MAX_LOCAL_DOFS];
        shape_values(self.degree, xhat, &mut out);
        out[..self.nloc].to_vec()
    }

    fn eval_basis_grad(&self, mesh: &TriMesh, cell: usize, xhat: Point) -> Result<Vec<[f64; 2]>> {
        let geom = mesh.cell_geometry(cell)?;
        let mut g = [[0.0; 2]; MAX_LOCAL_DOFS];
        shape_gradients(self.degree, xhat, &mut g);
        Ok(g[..self.nloc]
            .iter()
            .map(|&gh| geom.push_gradient(gh))
            .collect())
    }

    fn interpolate(&self, _mesh: &TriMesh, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&p| f(p)).collect()
    }
}

/// Piecewise constants, one dof per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct P0Space {
    dof_map: Vec<usize>,
}

impl P0Space {
    pub fn new(mesh: &TriMesh) -> Self {
        Self {
            dof_map: (0..mesh.num_cells()).collect(),
        }
    }
}

impl FiniteElementSpace for P0Space {
    fn ndofs(&self) -> usize {
        self.dof_map.len()
    }

    fn local_dofs(&self, cell: usize) -> &[usize] {
        std::slice::from_ref(&self.dof_map[cell])
    }

    fn eval_basis(&self, _cell: usize, _xhat: Point) -> Vec<f64> {
        vec![1.0]
    }

    fn eval_basis_grad(&self, mesh: &TriMesh, cell: usize, _xhat: Point) -> Result<Vec<[f64; 2]>> {
        mesh.cell_geometry(cell)?;
        Ok(vec![[0.0, 0.0]])
    }

    fn interpolate(&self, mesh: &TriMesh, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
        (0..mesh.num_cells())
            .map(|c| f(mesh.cell_centroid(c)))
            .collect()
    }
}

/// The product space `V_h^c x V_h^0`. Coefficient vectors hold all
/// continuous dofs first, then one value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EGSpace {
    pub cont: LagrangeSpace,
    pub constants: P0Space,
}

impl EGSpace {
    pub fn new(mesh: &TriMesh, degree: usize) -> Result<Self> {
        Ok(Self {
            cont: LagrangeSpace::new(mesh, degree)?,
            constants: P0Space::new(mesh),
        })
    }

    pub fn degree(&self) -> usize {
        self.cont.degree()
    }

    pub fn n_cont(&self) -> usize {
        self.cont.ndofs()
    }

    pub fn n_const(&self) -> usize {
        self.constants.ndofs()
    }

    pub fn total_ndofs(&self) -> usize {
        self.n_cont() + self.n_const()
    }

    /// Global index of the piecewise-constant dof of `cell`.
    pub fn const_dof(&self, cell: usize) -> usize {
        self.n_cont() + cell
    }

    /// The pair `(1, -1)`, which represents the zero function.
    pub fn kernel_vector(&self) -> Vec<f64> {
        let mut v = vec![1.0; self.total_ndofs()];
        v[self.n_cont()..].iter_mut().for_each(|x| *x = -1.0);
        v
    }

    /// Checks that a mesh matches the dimensions this space was built on.
    pub fn check_mesh(&self, mesh: &TriMesh) -> Result<()> {
        let expected = match self.degree() {
            1 => mesh.num_vertices(),
            _ => mesh.num_vertices() + mesh.num_facets(),
        };
        if expected != self.n_cont() || mesh.num_cells() != self.n_const() {
            return Err(Error::DimensionMismatch {
                expected: self.total_ndofs(),
                got: expected + mesh.num_cells(),
            });
        }
        Ok(())
    }
}

/// A discrete function `u_h = u_h^c + u_h^0` stored on an [`EGSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct EGFunction {
    pub coeffs: Vec<f64>,
    n_cont: usize,
}

impl EGFunction {
    pub fn new(space: &EGSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.total_ndofs() {
            return Err(Error::DimensionMismatch {
                expected: space.total_ndofs(),
                got: coeffs.len(),
            });
        }
        Ok(Self {
            coeffs,
            n_cont: space.n_cont(),
        })
    }

    pub fn zeros(space: &EGSpace) -> Self {
        Self {
            coeffs: vec![0.0; space.total_ndofs()],
            n_cont: space.n_cont(),
        }
    }

    /// Builds `(interp(f), 0)`.
    pub fn from_continuous(space: &EGSpace, mesh: &TriMesh, f: &dyn Fn(Point) -> f64) -> Self {
        let mut coeffs = space.cont.interpolate(mesh, f);
        coeffs.resize(space.total_ndofs(), 0.0);
        Self {
            coeffs,
            n_cont: space.n_cont(),
        }
    }

    pub fn continuous(&self) -> &[f64] {
        &self.coeffs[..self.n_cont]
    }

    pub fn constant(&self) -> &[f64] {
        &self.coeffs[self.n_cont..]
    }

    pub fn value(&self, space: &EGSpace, cell: usize, xhat: Point) -> f64 {
        let mut phi = [0.0; MAX_LOCAL_DOFS];
        shape_values(space.degree(), xhat, &mut phi);
        let dofs = space.cont.local_dofs(cell);
        let vc: f64 = dofs
            .iter()
            .zip(&phi)
            .map(|(&d, p)| self.coeffs[d] * p)
            .sum();
        vc + self.coeffs[self.n_cont + cell]
    }

    /// Element-wise gradient (the constant part contributes nothing).
    pub fn gradient(&self, space: &EGSpace, mesh: &TriMesh, cell: usize, xhat: Point) -> [f64; 2] {
        let geom = mesh.cell_geometry(cell).expect("valid cell");
        let mut g = [[0.0; 2]; MAX_LOCAL_DOFS];
        shape_gradients(space.degree(), xhat, &mut g);
        let dofs = space.cont.local_dofs(cell);
        let mut ghat = [0.0; 2];
        for (&d, gl) in dofs.iter().zip(&g) {
            ghat[0] += self.coeffs[d] * gl[0];
            ghat[1] += self.coeffs[d] * gl[1];
        }
        geom.push_gradient(ghat)
    }

    /// Moves the area-weighted mean of the cell constants into the continuous
    /// part. Lagrange bases sum to one, so the represented function is
    /// unchanged. Returns the shift.
    pub fn center_constants(&mut self, mesh: &TriMesh) -> f64 {
        let (cont, consts) = self.coeffs.split_at_mut(self.n_cont);
        let total: f64 = (0..consts.len()).map(|c| mesh.cell_area(c)).sum();
        let mean = consts
            .iter()
            .enumerate()
            .map(|(c, v)| v * mesh.cell_area(c))
            .sum::<f64>()
            / total;
        consts.iter_mut().for_each(|v| *v -= mean);
        cont.iter_mut().for_each(|v| *v += mean);
        mean
    }

    /// Evaluates at a physical point of the unit square.
    pub fn value_at(&self, space: &EGSpace, mesh: &TriMesh, x: Point) -> f64 {
        let (c, xhat) = mesh.locate(x);
        self.value(space, c, xhat)
    }
}
