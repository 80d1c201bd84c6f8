use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CscMatrix {
    n_rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CscMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicate coordinates and
    /// out-of-range indices are input errors; explicit zeros are dropped.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n_cols + 1];
        for &(r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::Input(format!("entry ({r}, {c}) outside a {n_rows}x{n_cols} matrix")));
            }
            if !v.is_finite() {
                return Err(Error::Input(format!("non-finite coefficient at ({r}, {c})")));
            }
            counts[c + 1] += 1;
        }
        for c in 0..n_cols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            entries[next[c]] = (r, v);
            next[c] += 1;
        }
        let mut col_ptr = Vec::with_capacity(n_cols + 1);
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        col_ptr.push(0);
        for c in 0..n_cols {
            let seg = &mut entries[counts[c]..counts[c + 1]];
            seg.sort_unstable_by_key(|e| e.0);
            for k in 0..seg.len() {
                if k > 0 && seg[k].0 == seg[k - 1].0 {
                    return Err(Error::Input(format!("duplicate entry at ({}, {c})", seg[k].0)));
                }
                if seg[k].1 != 0.0 {
                    row_idx.push(seg[k].0);
                    vals.push(seg[k].1);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(CscMatrix { n_rows, col_ptr, row_idx, vals })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.col_ptr.len().saturating_sub(1)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Row indices and values of column `c`, rows ascending.
    #[inline]
    pub fn col(&self, c: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.col_ptr[c], self.col_ptr[c + 1]);
        (&self.row_idx[a..b], &self.vals[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (rows, vals) = self.col(c);
        rows.binary_search(&r).map_or(0.0, |k| vals[k])
    }

    /// `y += alpha * A x` for dense `x`.
    pub fn mul_add(&self, x: &[f64], alpha: f64, y: &mut [f64]) {
        for c in 0..self.n_cols() {
            let xc = x[c];
            if xc != 0.0 {
                let (rows, vals) = self.col(c);
                for (r, v) in rows.iter().zip(vals) {
                    y[*r] += alpha * v * xc;
                }
            }
        }
    }

    /// `A^T y` entry for column `c`.
    #[inline]
    pub fn col_dot(&self, c: usize, y: &[f64]) -> f64 {
        let (rows, vals) = self.col(c);
        rows.iter().zip(vals).map(|(r, v)| v * y[*r]).sum()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_cols()).flat_map(move |c| {
            let (rows, vals) = self.col(c);
            rows.iter().zip(vals).map(move |(r, v)| (*r, c, *v))
        })
    }
}
