//! Compressed sparse row storage built from coordinate triples.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `(row, col, value)` coordinate entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple(pub usize, pub usize, pub f64);

/// Real sparse matrix in CSR layout. Duplicate coordinates are summed on
/// construction and explicit zeros are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triples(nrows: usize, ncols: usize, triples: &[Triple]) -> Result<Self> {
        for (k, t) in triples.iter().enumerate() {
            if t.0 >= nrows || t.1 >= ncols {
                return Err(Error::InvalidArgument(format!(
                    "triple {k} at ({}, {}) outside {nrows}x{ncols}",
                    t.0, t.1
                )));
            }
            if !t.2.is_finite() {
                return Err(Error::InvalidArgument(format!("triple {k} is not finite")));
            }
        }
        let mut sorted: Vec<Triple> = triples.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for t in sorted {
            if last == Some((t.0, t.1)) {
                *values.last_mut().unwrap() += t.2;
                continue;
            }
            row_ptr[t.0 + 1] += 1;
            col_idx.push(t.1);
            values.push(t.2);
            last = Some((t.0, t.1));
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(dense: &DMatrix<f64>) -> Self {
        let mut triples = Vec::new();
        for i in 0..dense.nrows() {
            for j in 0..dense.ncols() {
                let v = dense[(i, j)];
                if v != 0.0 {
                    triples.push(Triple(i, j, v));
                }
            }
        }
        Self::from_triples(dense.nrows(), dense.ncols(), &triples).expect("indices in range")
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

    pub fn density(&self) -> f64 {
        let cells = self.nrows * self.ncols;
        if cells == 0 {
            0.0
        } else {
            self.nnz() as f64 / cells as f64
        }
    }

    /// Entries of row `i` as `(col, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triples(&self) -> Vec<Triple> {
        (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, v)| Triple(i, j, v)))
            .collect()
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `x = Aᵀ y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += v * yi;
            }
        }
        out
    }

    /// Power-iteration estimate of `‖A‖₂²`, the largest eigenvalue of `AᵀA`.
    pub fn spectral_norm_sq(&self, iters: usize) -> f64 {
        if self.nnz() == 0 {
            return 0.0;
        }
        let mut x = vec![1.0 / (self.ncols as f64).sqrt(); self.ncols];
        let mut estimate = 0.0;
        for _ in 0..iters {
            let y = self.tr_mul_vec(&self.mul_vec(&x));
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return estimate;
            }
            let converged = (norm - estimate).abs() <= 1e-10 * norm;
            estimate = norm;
            x = y.into_iter().map(|v| v / norm).collect();
            if converged {
                break;
            }
        }
        estimate
    }

    /// Accumulates `scale · AᵀA` into the dense square matrix `target`.
    pub fn add_scaled_gram(&self, scale: f64, target: &mut DMatrix<f64>) {
        assert_eq!(target.nrows(), self.ncols);
        assert_eq!(target.ncols(), self.ncols);
        for i in 0..self.nrows {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            let cols = &self.col_idx[span.clone()];
            let vals = &self.values[span];
            for (a, &ja) in cols.iter().enumerate() {
                let va = scale * vals[a];
                let mut column = target.column_mut(ja);
                for (b, &jb) in cols.iter().enumerate() {
                    column[jb] += va * vals[b];
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                out[(i, j)] += v;
            }
        }
        out
    }

    /// Copy with additional trailing columns given as `(row, value)` lists.
    pub fn with_appended_columns(&self, extra: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut triples = self.triples();
        for (k, col) in extra.iter().enumerate() {
            for &(i, v) in col {
                triples.push(Triple(i, self.ncols + k, v));
            }
        }
        Self::from_triples(self.nrows, self.ncols + extra.len(), &triples)
    }
}
