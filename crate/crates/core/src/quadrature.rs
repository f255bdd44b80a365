//! Quadrature on the reference triangle `(0,0), (1,0), (0,1)` and the
//! reference edge `[0, 1]`.
//!
//! Triangle rules up to degree 6 are the classical symmetric rules (Strang-Fix
//! and Dunavant). Higher degrees use a collapsed Gauss-Legendre product rule,
//! which is what the error norms and the assembly oracle need.

use crate::error::{Error, Result};
use crate::mesh::Point;

pub const MAX_TRIANGLE_DEGREE: usize = 20;
pub const MAX_EDGE_DEGREE: usize = 39;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub points: Vec<Point>,
    /// Weights sum to 1/2, the area of the reference triangle.
    pub weights: Vec<f64>,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule {
    /// Parameters in `[0, 1]`.
    pub points: Vec<f64>,
    /// Weights sum to 1.
    pub weights: Vec<f64>,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub triangle: TriangleRule,
    pub edge: EdgeRule,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn make_quadrature(triangle_degree: usize, edge_degree: usize) -> Result<QuadratureRule> {
    Ok(QuadratureRule {
        triangle: triangle_rule(triangle_degree)?,
        edge: edge_rule(edge_degree)?,
    })
}

/// Gauss-Legendre rule on `[0, 1]` exact for polynomials of degree `degree`.
pub fn edge_rule(degree: usize) -> Result<EdgeRule> {
    if degree > MAX_EDGE_DEGREE {
        return Err(Error::UnsupportedQuadrature {
            domain: "edge",
            degree,
        });
    }
    let npts = degree / 2 + 1;
    let (x, w) = gauss_legendre(npts);
    Ok(EdgeRule {
        points: x.iter().map(|&xi| 0.5 * (xi + 1.0)).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        degree,
    })
}

pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    let rule = match degree {
        0 | 1 => TriangleRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
            degree: 1,
        },
        2 => {
            let (a, b) = (1.0 / 6.0, 2.0 / 3.0);
            TriangleRule {
                points: vec![[a, a], [b, a], [a, b]],
                weights: vec![1.0 / 6.0; 3],
                degree: 2,
            }
        }
        3 | 4 => {
            let mut r = SymmetricBuilder::default();
            r.orbit3(0.223381589678011, 0.445948490915965);
            r.orbit3(0.109951743655322, 0.091576213509771);
            r.finish(4)
        }
        5 => {
            let mut r = SymmetricBuilder::default();
            r.centroid(0.225);
            r.orbit3(0.132394152788506, 0.470142064105115);
            r.orbit3(0.125939180544827, 0.101286507323456);
            r.finish(5)
        }
        6 => {
            let mut r = SymmetricBuilder::default();
            r.orbit3(0.116786275726379, 0.249286745170910);
            r.orbit3(0.050844906370207, 0.063089014491502);
            r.orbit6(0.082851075618374, 0.053145049844817, 0.310352451033784);
            r.finish(6)
        }
        d if d <= MAX_TRIANGLE_DEGREE => collapsed_gauss(d),
        d => {
            return Err(Error::UnsupportedQuadrature {
                domain: "triangle",
                degree: d,
            })
        }
    };
    Ok(rule)
}

/// Accumulates symmetric orbits given in barycentric coordinates with
/// weights normalized to a unit total.
#[derive(Default)]
struct SymmetricBuilder {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl SymmetricBuilder {
    fn push(&mut self, w: f64, l1: f64, l2: f64) {
        // Barycentric (l0, l1, l2) -> reference point (l1, l2).
        self.points.push([l1, l2]);
        self.weights.push(0.5 * w);
    }

    fn centroid(&mut self, w: f64) {
        self.push(w, 1.0 / 3.0, 1.0 / 3.0);
    }

    /// Orbit of `(1 - 2a, a, a)`.
    fn orbit3(&mut self, w: f64, a: f64) {
        let b = 1.0 - 2.0 * a;
        self.push(w, a, a);
        self.push(w, b, a);
        self.push(w, a, b);
    }

    /// Orbit of `(a, b, 1 - a - b)` over all six permutations.
    fn orbit6(&mut self, w: f64, a: f64, b: f64) {
        let c = 1.0 - a - b;
        for (p, q) in [(a, b), (b, a), (a, c), (c, a), (b, c), (c, b)] {
            self.push(w, p, q);
        }
    }

    fn finish(self, degree: usize) -> TriangleRule {
        TriangleRule {
            points: self.points,
            weights: self.weights,
            degree,
        }
    }
}

/// Duffy-collapsed tensor Gauss rule: `x = u`, `y = v (1 - u)`.
fn collapsed_gauss(degree: usize) -> TriangleRule {
    // The collapsed integrand has degree `degree + 1` in u.
    let m = (degree + 2).div_ceil(2);
    let (x, w) = gauss_legendre(m);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for (xi, wi) in x.iter().zip(&w) {
        let u = 0.5 * (xi + 1.0);
        for (xj, wj) in x.iter().zip(&w) {
            let v = 0.5 * (xj + 1.0);
            points.push([u, v * (1.0 - u)]);
            weights.push(0.25 * wi * wj * (1.0 - u));
        }
    }
    TriangleRule {
        points,
        weights,
        degree,
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th largest root.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (z * p - p0) / (z * z - 1.0);
    (p, dp)
}
