//! Compressed sparse row matrices with the handful of kernels diffusion needs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nodes::NodeVector;

/// Nonnegative sparse matrix in CSR layout.
///
/// Columns are sorted within each row and `(row, col)` pairs are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            cols: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            weights: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, weight)` triplets. Duplicate
    /// coordinates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, w) in &entries {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidInput(format!(
                    "entry ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "entry ({r}, {c}) has invalid weight {w}"
                )));
            }
        }
        entries.sort_by_key(|a| (a.0, a.1));

        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut weights: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, w) in entries {
            if last == Some((r, c)) {
                *weights.last_mut().expect("previous entry") += w;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            cols.push(c);
            weights.push(w);
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            cols,
            weights,
        })
    }

    /// Builds a matrix from dense rows, skipping zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::LengthMismatch {
                    context: "dense row",
                    expected: n_cols,
                    found: row.len(),
                });
            }
            triplets.extend(
                row.iter()
                    .enumerate()
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(c, &w)| (r, c, w)),
            );
        }
        Self::from_triplets(n_rows, n_cols, triplets)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (r, c, w) in self.triplets() {
            out[r][c] = w;
        }
        out
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(i) => self.weights[range.start + i],
            Err(_) => 0.0,
        }
    }

    /// Row sum, accumulated in column order.
    pub fn row_sum(&self, r: usize) -> f64 {
        self.weights[self.row_ptr[r]..self.row_ptr[r + 1]]
            .iter()
            .sum()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).map(move |(c, w)| (r, c, w)))
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.cols {
            counts[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut cols = vec![0; self.nnz()];
        let mut weights = vec![0.0; self.nnz()];
        for (r, c, w) in self.triplets() {
            let slot = next[c];
            next[c] += 1;
            cols[slot] = r;
            weights[slot] = w;
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            cols,
            weights,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if (self.n_rows, self.n_cols) != (other.n_rows, other.n_cols) {
            return Err(Error::DimensionMismatch {
                context: "sparse add",
                expected: (self.n_rows, self.n_cols),
                found: (other.n_rows, other.n_cols),
            });
        }
        Self::from_triplets(
            self.n_rows,
            self.n_cols,
            self.triplets().chain(other.triplets()),
        )
    }

    /// `self + I` for a square matrix.
    pub fn plus_identity(&self) -> Result<Self> {
        self.add(&Self::identity(self.n_rows))
    }

    /// Scales every row to sum to one. Rows without mass become a unit
    /// self-loop, so the result is row-stochastic everywhere.
    pub fn row_normalize(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            let sum = self.row_sum(r);
            if sum > 0.0 {
                triplets.extend(
                    self.row(r)
                        .filter(|&(_, w)| w > 0.0)
                        .map(|(c, w)| (r, c, w / sum)),
                );
            } else if r < self.n_cols {
                triplets.push((r, r, 1.0));
            }
        }
        Self::from_triplets(self.n_rows, self.n_cols, triplets)
            .expect("normalized entries stay in range")
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n_cols {
            return Err(Error::LengthMismatch {
                context: "sparse matvec",
                expected: self.n_cols,
                found: v.len(),
            });
        }
        Ok((0..self.n_rows)
            .map(|r| self.row(r).map(|(c, w)| w * v[c]).sum())
            .collect())
    }

    /// Row-by-row (Gustavson) sparse product.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch {
                context: "sparse matmul",
                expected: (self.n_rows, self.n_cols),
                found: (other.n_rows, other.n_cols),
            });
        }
        let mut acc = vec![0.0f64; other.n_cols];
        let mut touched = vec![false; other.n_cols];
        let mut active: Vec<usize> = Vec::new();
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for r in 0..self.n_rows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        active.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            active.sort_unstable();
            for &c in &active {
                cols.push(c);
                weights.push(acc[c]);
                acc[c] = 0.0;
                touched[c] = false;
            }
            active.clear();
            row_ptr.push(cols.len());
        }
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: other.n_cols,
            row_ptr,
            cols,
            weights,
        })
    }

    /// Principal submatrix on `nodes` (which must be strictly increasing),
    /// re-indexed to `0..nodes.len()`.
    pub fn restrict(&self, nodes: &[usize]) -> Self {
        let mut position = vec![usize::MAX; self.n_rows.max(self.n_cols)];
        for (i, &n) in nodes.iter().enumerate() {
            position[n] = i;
        }
        let mut triplets = Vec::new();
        for (i, &n) in nodes.iter().enumerate() {
            for (c, w) in self.row(n) {
                let j = position[c];
                if j != usize::MAX {
                    triplets.push((i, j, w));
                }
            }
        }
        Self::from_triplets(nodes.len(), nodes.len(), triplets)
            .expect("restricted entries stay in range")
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.n_rows == self.n_cols
            && self
                .triplets()
                .all(|(r, c, w)| libm::fabs(self.get(c, r) - w) <= tol)
    }
}

pub fn row_normalize(m: &SparseMatrix) -> SparseMatrix {
    m.row_normalize()
}

pub fn sparse_matvec(m: &SparseMatrix, v: &NodeVector) -> Result<NodeVector> {
    m.matvec(v.values()).map(NodeVector::new)
}

pub fn sparse_matmul(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix> {
    a.matmul(b)
}
