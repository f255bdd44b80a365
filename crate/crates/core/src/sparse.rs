//! Compressed sparse row storage for the symmetric system and its blocks.

use std::io::Write;

use crate::error::{Error, Result};

/// Triplet accumulator. Duplicates are summed on compression in insertion
/// order, so identical insertion sequences give bit-identical matrices.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, cap: usize) -> Self {
        Self {
            dim,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.dim && j < self.dim);
        self.entries.push((i, j, v));
    }

    /// Pushes `v` at `(i, j)` and, off the diagonal, the same value at `(j, i)`.
    #[inline]
    pub fn push_sym(&mut self, i: usize, j: usize, v: f64) {
        self.push(i, j, v);
        if i != j {
            self.push(j, i, v);
        }
    }

    pub fn build(mut self) -> SparseSymMatrix {
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_offsets = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.entries.len() / 2);
        let mut vals: Vec<f64> = Vec::with_capacity(self.entries.len() / 2);
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_offsets[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for r in 0..self.dim {
            row_offsets[r + 1] += row_offsets[r];
        }
        SparseSymMatrix {
            dim: self.dim,
            row_offsets,
            cols,
            vals,
        }
    }
}

/// Square CSR matrix that is expected to be symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    row_offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymMatrix {
    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            dim: d.len(),
            row_offsets: (0..=d.len()).collect(),
            cols: (0..d.len()).collect(),
            vals: d.to_vec(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let mut b = TripletBuilder::new(rows.len());
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(p) => self.vals[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.row_offsets[i]..self.row_offsets[i + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            *yi = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T|` over stored entries (missing mirrors count as zero).
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                if j > i {
                    worst = worst.max((v - self.get(j, i)).abs());
                } else if j < i && self.get(j, i) == 0.0 {
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }

    /// Fails unless `max |A - A^T| <= tol * max |A|`.
    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        let asym = self.asymmetry();
        let scale = self.max_abs();
        if asym > tol * scale {
            return Err(Error::NotSymmetric { asym, scale });
        }
        Ok(())
    }

    /// Principal submatrix on `range`, re-indexed from zero.
    pub fn principal_block(&self, range: std::ops::Range<usize>) -> Self {
        let mut b = TripletBuilder::new(range.len());
        for i in range.clone() {
            for (j, v) in self.row(i) {
                if range.contains(&j) {
                    b.push(i - range.start, j - range.start, v);
                }
            }
        }
        b.build()
    }

    /// Block-diagonal matrix `diag(self, other)`.
    pub fn block_diag(&self, other: &Self) -> Self {
        let mut b = TripletBuilder::new(self.dim + other.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                b.push(i, j, v);
            }
        }
        for i in 0..other.dim {
            for (j, v) in other.row(i) {
                b.push(self.dim + i, self.dim + j, v);
            }
        }
        b.build()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.dim]; self.dim];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    /// MatrixMarket `coordinate real symmetric`, lower triangle, 1-based.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let lower: Vec<(usize, usize, f64)> = (0..self.dim)
            .flat_map(|i| {
                self.row(i)
                    .filter(move |&(j, _)| j <= i)
                    .map(move |(j, v)| (i, j, v))
            })
            .collect();
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "{} {} {}", self.dim, self.dim, lower.len())?;
        for (i, j, v) in lower {
            writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
