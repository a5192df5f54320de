//! Minimal CSR matrix used for adjacency-derived operators.

use ndarray::Array2;

use crate::graph::Graph;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut rows: Vec<usize> = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            if let (Some(&li), Some(&lj)) = (rows.last(), col_idx.last()) {
                if li == i && lj == j {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(i);
            col_idx.push(j);
            values.push(v);
        }
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((i, j), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != 0.0 {
                row_ptr[i + 1] += 1;
                keep_cols.push(j);
                keep_vals.push(v);
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
        }
    }

    /// Adjacency of `g` scaled by `scale`, embedded in an `n × n` matrix.
    pub fn from_graph(g: &Graph, n: usize, scale: f64) -> Self {
        let triplets = (0..g.n())
            .flat_map(|u| g.neighbors(u).iter().map(move |&v| (u, v, scale)))
            .collect();
        SparseMatrix::from_triplets(n, n, triplets)
    }

    pub fn from_dense(m: &Array2<f64>) -> Self {
        let (r, c) = m.dim();
        let triplets = m
            .indexed_iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|((i, j), &v)| (i, j, v))
            .collect();
        SparseMatrix::from_triplets(r, c, triplets)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let triplets = (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (j, i, v)))
            .collect();
        SparseMatrix::from_triplets(self.ncols, self.nrows, triplets)
    }

    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols && *self == self.transpose()
    }

    /// `X · S` for a dense `X` with `ncols(X) == nrows(S)`. Zero entries of
    /// `X` are skipped.
    pub fn left_mul_dense(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.ncols(), self.nrows);
        let mut out = Array2::zeros((x.nrows(), self.ncols));
        for (xr, mut or) in x.rows().into_iter().zip(out.rows_mut()) {
            for (i, &xi) in xr.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                for (j, v) in self.row(i) {
                    or[j] += xi * v;
                }
            }
        }
        out
    }

    /// `S · X` for a dense `X` with `nrows(X) == ncols(S)`.
    pub fn mul_dense(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.ncols);
        let mut out = Array2::zeros((self.nrows, x.ncols()));
        for i in 0..self.nrows {
            let mut orow = out.row_mut(i);
            for (j, v) in self.row(i) {
                orow.scaled_add(v, &x.row(j));
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.nrows, self.ncols));
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}
