//! Compressed-sparse-column storage for program data.

use serde::{Deserialize, Serialize};

use super::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowval: Vec<usize>,
    pub nzval: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CscMatrix { nrows, ncols, colptr: vec![0; ncols + 1], rowval: vec![], nzval: vec![] }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut t: Vec<(usize, usize, f64)> = triplets.to_vec();
        t.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut colptr = vec![0usize; ncols + 1];
        let mut rowval = Vec::with_capacity(t.len());
        let mut nzval: Vec<f64> = Vec::with_capacity(t.len());
        let mut cols = Vec::with_capacity(t.len());
        for &(r, c, v) in &t {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) outside {nrows}x{ncols}");
            if let (Some(&lr), Some(&lc)) = (rowval.last(), cols.last()) {
                if lr == r && lc == c {
                    *nzval.last_mut().unwrap() += v;
                    continue;
                }
            }
            rowval.push(r);
            cols.push(c);
            nzval.push(v);
        }
        let keep: Vec<bool> = nzval.iter().map(|v| *v != 0.0).collect();
        let mut rv = Vec::with_capacity(rowval.len());
        let mut nv = Vec::with_capacity(rowval.len());
        for k in 0..rowval.len() {
            if keep[k] {
                rv.push(rowval[k]);
                nv.push(nzval[k]);
                colptr[cols[k] + 1] += 1;
            }
        }
        for c in 0..ncols {
            colptr[c + 1] += colptr[c];
        }
        CscMatrix { nrows, ncols, colptr, rowval: rv, nzval: nv }
    }

    pub fn from_dense(m: &nalgebra::DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                if m[(r, c)] != 0.0 {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &t)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.nzval.len()
    }

    /// Iterates `(row, col, value)` in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.colptr[c]..self.colptr[c + 1]).map(move |k| (self.rowval[k], c, self.nzval[k]))
        })
    }

    /// `y += alpha · M x`.
    pub fn gemv<T: Real>(&self, alpha: T, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for c in 0..self.ncols {
            let xc = alpha * x[c];
            for k in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowval[k]] += T::from_f64(self.nzval[k]) * xc;
            }
        }
    }

    /// `y += alpha · Mᵀ x`.
    pub fn gemv_t<T: Real>(&self, alpha: T, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for c in 0..self.ncols {
            let mut acc = T::zero();
            for k in self.colptr[c]..self.colptr[c + 1] {
                acc += T::from_f64(self.nzval[k]) * x[self.rowval[k]];
            }
            y[c] += alpha * acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.gemv(1.0, x, &mut y);
        y
    }

    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.gemv_t(1.0, x, &mut y);
        y
    }

    /// Scales rows by `r` and columns by `c`: `diag(r) M diag(c)`.
    pub fn scale(&mut self, r: &[f64], c: &[f64]) {
        for col in 0..self.ncols {
            for k in self.colptr[col]..self.colptr[col + 1] {
                self.nzval[k] *= r[self.rowval[k]] * c[col];
            }
        }
    }

    /// Left-multiplies a contiguous row block by a small dense matrix.
    pub fn transform_rows(&self, start: usize, t: &nalgebra::DMatrix<f64>) -> Self {
        let d = t.nrows();
        let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz() * 2);
        for (r, c, v) in self.iter() {
            if r >= start && r < start + d {
                for i in 0..d {
                    let w = t[(i, r - start)] * v;
                    if w != 0.0 {
                        trip.push((start + i, c, w));
                    }
                }
            } else {
                trip.push((r, c, v));
            }
        }
        Self::from_triplets(self.nrows, self.ncols, &trip)
    }
}
