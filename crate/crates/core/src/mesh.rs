//! Structured triangulations of the unit square with full facet topology.
//!
//! The mesh for subdivision count `n` bisects every one of the `n x n`
//! subsquares along the diagonal from its lower-left to its upper-right
//! corner. Square `(i, j)` owns cells `2 (j n + i)` (below the diagonal) and
//! `2 (j n + i) + 1` (above it).
//!
//! Facets are numbered in the order they are first met while walking the
//! cells in ascending order, so the first cell to see a facet is the one
//! with the smaller index. That cell is `cell_plus` and the stored normal is
//! its outward normal.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Classification of a facet for assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FacetClass {
    Interior,
    Dirichlet,
    Neumann,
}

impl FacetClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FacetClass::Interior => "interior",
            FacetClass::Dirichlet => "dirichlet",
            FacetClass::Neumann => "neumann",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacetRecord {
    /// Vertex indices, ordered counter-clockwise with respect to `cell_plus`.
    pub endpoints: [usize; 2],
    pub cell_plus: usize,
    pub cell_minus: Option<usize>,
    /// Unit outward normal of `cell_plus`.
    pub normal: [f64; 2],
    /// Facet length `h_e`.
    pub length: f64,
    pub class: FacetClass,
}

impl FacetRecord {
    pub fn is_interior(&self) -> bool {
        self.cell_minus.is_some()
    }
}

/// Immutable triangulation of the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    n: usize,
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    facets: Vec<FacetRecord>,
    /// Local facet `i` of a cell is opposite its local vertex `i`.
    cell_to_facets: Vec<[usize; 3]>,
    h_max: f64,
}

/// Affine map `F(x) = B x + b` from the reference triangle
/// `(0,0), (1,0), (0,1)` onto a physical cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub origin: Point,
    /// Columns are `p1 - p0` and `p2 - p0`; `jacobian[r][c]`.
    pub jacobian: [[f64; 2]; 2],
    /// Signed determinant of the Jacobian.
    pub det: f64,
    /// `B^{-T}`, which maps reference gradients to physical gradients.
    pub inv_transpose: [[f64; 2]; 2],
}

impl CellGeometry {
    pub fn from_vertices(p: [Point; 3]) -> Result<Self> {
        let b = [
            [p[1][0] - p[0][0], p[2][0] - p[0][0]],
            [p[1][1] - p[0][1], p[2][1] - p[0][1]],
        ];
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        let scale = (b[0][0].abs() + b[0][1].abs() + b[1][0].abs() + b[1][1].abs()).powi(2);
        if !(det.abs() > 1e-14 * scale) {
            return Err(Error::DegenerateCell {
                cell: usize::MAX,
                det,
            });
        }
        let inv_det = 1.0 / det;
        // B^{-1} = [[b11, -b01], [-b10, b00]] / det; B^{-T} is its transpose.
        let inv_transpose = [
            [b[1][1] * inv_det, -b[1][0] * inv_det],
            [-b[0][1] * inv_det, b[0][0] * inv_det],
        ];
        Ok(Self {
            origin: p[0],
            jacobian: b,
            det,
            inv_transpose,
        })
    }

    pub fn abs_det(&self) -> f64 {
        self.det.abs()
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }

    pub fn map(&self, xhat: Point) -> Point {
        let b = &self.jacobian;
        [
            self.origin[0] + b[0][0] * xhat[0] + b[0][1] * xhat[1],
            self.origin[1] + b[1][0] * xhat[0] + b[1][1] * xhat[1],
        ]
    }

    /// Inverse of [`CellGeometry::map`].
    pub fn inverse_map(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        // B^{-1} d, with B^{-1} = (B^{-T})^T.
        let it = &self.inv_transpose;
        [
            it[0][0] * d[0] + it[1][0] * d[1],
            it[0][1] * d[0] + it[1][1] * d[1],
        ]
    }

    /// Maps a reference gradient to the physical gradient.
    #[inline]
    pub fn push_gradient(&self, ghat: [f64; 2]) -> [f64; 2] {
        let it = &self.inv_transpose;
        [
            it[0][0] * ghat[0] + it[0][1] * ghat[1],
            it[1][0] * ghat[0] + it[1][1] * ghat[1],
        ]
    }
}

/// Reference coordinates of the three vertices of the reference triangle.
pub const REFERENCE_VERTICES: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

impl TriMesh {
    /// Builds the bisected `n x n` grid with every boundary facet marked Dirichlet.
    pub fn structured(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "subdivision count must be at least 1".into(),
            ));
        }
        let np = n + 1;
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let vid = |i: usize, j: usize| j * np + i;
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = vid(i, j);
                let v10 = vid(i + 1, j);
                let v01 = vid(i, j + 1);
                let v11 = vid(i + 1, j + 1);
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }

        let mut facets: Vec<FacetRecord> = Vec::with_capacity(3 * n * n + 2 * n);
        let mut cell_to_facets = vec![[0usize; 3]; cells.len()];
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * n * n + 2 * n);
        for (c, cell) in cells.iter().enumerate() {
            for local in 0..3 {
                let a = cell[(local + 1) % 3];
                let b = cell[(local + 2) % 3];
                let key = (a.min(b), a.max(b));
                let f = match lookup.get(&key) {
                    Some(&f) => {
                        facets[f].cell_minus = Some(c);
                        facets[f].class = FacetClass::Interior;
                        f
                    }
                    None => {
                        let pa = vertices[a];
                        let pb = vertices[b];
                        let d = [pb[0] - pa[0], pb[1] - pa[1]];
                        let length = d[0].hypot(d[1]);
                        // CCW edge direction rotated clockwise is the outward normal.
                        let normal = [d[1] / length, -d[0] / length];
                        facets.push(FacetRecord {
                            endpoints: [a, b],
                            cell_plus: c,
                            cell_minus: None,
                            normal,
                            length,
                            class: FacetClass::Dirichlet,
                        });
                        lookup.insert(key, facets.len() - 1);
                        facets.len() - 1
                    }
                };
                cell_to_facets[c][local] = f;
            }
        }

        let mut mesh = Self {
            n,
            vertices,
            cells,
            facets,
            cell_to_facets,
            h_max: 0.0,
        };
        mesh.h_max = (0..mesh.num_cells())
            .map(|c| mesh.cell_diameter(c))
            .fold(0.0, f64::max);
        Ok(mesh)
    }

    /// Splits boundary facets into Dirichlet (predicate true at the facet
    /// midpoint) and Neumann. Interior facets are left alone.
    pub fn classify_facets(mut self, dirichlet: impl Fn(Point) -> bool) -> Self {
        for f in 0..self.facets.len() {
            if self.facets[f].is_interior() {
                continue;
            }
            let mid = self.facet_midpoint(f);
            self.facets[f].class = if dirichlet(mid) {
                FacetClass::Dirichlet
            } else {
                FacetClass::Neumann
            };
        }
        self
    }

    pub fn subdivisions(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn facets(&self) -> &[FacetRecord] {
        &self.facets
    }

    pub fn facet(&self, f: usize) -> &FacetRecord {
        &self.facets[f]
    }

    pub fn cell_facets(&self, c: usize) -> [usize; 3] {
        self.cell_to_facets[c]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn num_boundary_facets(&self) -> usize {
        self.facets.iter().filter(|f| !f.is_interior()).count()
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn cell_vertices(&self, c: usize) -> [Point; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    pub fn cell_geometry(&self, c: usize) -> Result<CellGeometry> {
        if c >= self.cells.len() {
            return Err(Error::InvalidArgument(format!(
                "cell index {c} out of range ({} cells)",
                self.cells.len()
            )));
        }
        CellGeometry::from_vertices(self.cell_vertices(c)).map_err(|e| match e {
            Error::DegenerateCell { det, .. } => Error::DegenerateCell { cell: c, det },
            other => other,
        })
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        let p = self.cell_vertices(c);
        0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
            - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        let p = self.cell_vertices(c);
        let d = |a: Point, b: Point| (a[0] - b[0]).hypot(a[1] - b[1]);
        d(p[0], p[1]).max(d(p[1], p[2])).max(d(p[2], p[0]))
    }

    pub fn cell_centroid(&self, c: usize) -> Point {
        let p = self.cell_vertices(c);
        [
            (p[0][0] + p[1][0] + p[2][0]) / 3.0,
            (p[0][1] + p[1][1] + p[2][1]) / 3.0,
        ]
    }

    pub fn facet_midpoint(&self, f: usize) -> Point {
        let [a, b] = self.facets[f].endpoints;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    /// Point on facet `f` at parameter `t` in `[0, 1]` along its endpoints.
    pub fn facet_point(&self, f: usize, t: f64) -> Point {
        let [a, b] = self.facets[f].endpoints;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    }

    /// Local index of facet `f` within cell `c` and whether the local edge
    /// runs opposite to the facet's stored endpoint order.
    pub fn local_facet(&self, c: usize, f: usize) -> (usize, bool) {
        let local = self.cell_to_facets[c]
            .iter()
            .position(|&g| g == f)
            .expect("facet does not belong to cell");
        let start = self.cells[c][(local + 1) % 3];
        (local, start != self.facets[f].endpoints[0])
    }

    /// Outward unit normal of cell `c` on its facet `f`.
    pub fn outward_normal(&self, c: usize, f: usize) -> [f64; 2] {
        let rec = &self.facets[f];
        if rec.cell_plus == c {
            rec.normal
        } else {
            [-rec.normal[0], -rec.normal[1]]
        }
    }

    /// Cells sharing at least one vertex with `c`, excluding `c` itself, in
    /// ascending order.
    pub fn vertex_neighbors(&self, c: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let cell = self.cells[c];
        // Structured grids only touch cells in the surrounding 3x3 block of squares.
        let sq = c / 2;
        let (si, sj) = (sq % self.n, sq / self.n);
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                let (i, j) = (si as i64 + di, sj as i64 + dj);
                if i < 0 || j < 0 || i >= self.n as i64 || j >= self.n as i64 {
                    continue;
                }
                let base = 2 * (j as usize * self.n + i as usize);
                for other in [base, base + 1] {
                    if other != c && self.cells[other].iter().any(|v| cell.contains(v)) {
                        out.push(other);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Locates the cell containing `x` and returns it with the reference
    /// coordinates of `x` in that cell. Points outside the square are clamped.
    pub fn locate(&self, x: Point) -> (usize, Point) {
        let n = self.n as f64;
        let clamp = |v: f64| v.clamp(0.0, 1.0);
        let (px, py) = (clamp(x[0]), clamp(x[1]));
        let i = ((px * n).floor() as usize).min(self.n - 1);
        let j = ((py * n).floor() as usize).min(self.n - 1);
        let s = px * n - i as f64;
        let t = py * n - j as f64;
        let base = 2 * (j * self.n + i);
        let c = if t <= s { base } else { base + 1 };
        let geom = CellGeometry::from_vertices(self.cell_vertices(c)).expect("valid cell");
        (c, geom.inverse_map([px, py]))
    }

    /// Debug dump: `v x y`, `c i j k`, `f i j class` lines.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {:.17e} {:.17e}", v[0], v[1])?;
        }
        for c in &self.cells {
            writeln!(w, "c {} {} {}", c[0], c[1], c[2])?;
        }
        for f in &self.facets {
            writeln!(
                w,
                "f {} {} {}",
                f.endpoints[0],
                f.endpoints[1],
                f.class.as_str()
            )?;
        }
        Ok(())
    }
}

/// Convenience wrapper matching the module's operation name.
pub fn build_structured_mesh(n: usize) -> Result<TriMesh> {
    TriMesh::structured(n)
}
