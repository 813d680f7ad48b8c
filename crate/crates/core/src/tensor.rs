// SPDX-License-Identifier: Apache-2.0

//! Row-major `f32` matrices and the vector-matrix kernels used by the engine.
//!
//! Every kernel sums over the shared dimension in ascending index order, one
//! output row at a time. A row of a batched product is therefore bitwise
//! identical to the same row computed alone, whatever the batch size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f32) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "matrix data",
                format!("{} values ({rows}x{cols})", rows * cols),
                data.len(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::shape("matrix rows", cols, row.len()));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f32) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn fill(&mut self, value: f32) {
        self.data.fill(value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `out[j] += a * w[j]`
#[inline]
pub(crate) fn axpy(a: f32, w: &[f32], out: &mut [f32]) {
    debug_assert_eq!(w.len(), out.len());
    for (o, &x) in out.iter_mut().zip(w) {
        *o += a * x;
    }
}

/// `out += x · w[row_offset .. row_offset + x.len(), :]`
///
/// Zero entries of `x` are skipped, which makes spike-driven products cheap.
pub(crate) fn accumulate_row(x: &[f32], w: &Matrix, row_offset: usize, out: &mut [f32]) {
    debug_assert!(row_offset + x.len() <= w.rows);
    debug_assert_eq!(out.len(), w.cols);
    for (k, &a) in x.iter().enumerate() {
        if a != 0.0 {
            axpy(a, w.row(row_offset + k), out);
        }
    }
}

const K_BLOCK: usize = 64;

/// Batched form of [`accumulate_row`]: `out.row(b) += x.row(b) · w[offset.., :]`.
///
/// Blocks over the shared dimension so a slab of `w` stays in cache while
/// every batch row consumes it. Within each output element the summation
/// order is still ascending in k.
pub(crate) fn accumulate_batch(x: &Matrix, w: &Matrix, row_offset: usize, out: &mut Matrix) {
    debug_assert_eq!(x.rows, out.rows);
    debug_assert_eq!(out.cols, w.cols);
    let k_total = x.cols;
    let mut k0 = 0;
    while k0 < k_total {
        let k1 = (k0 + K_BLOCK).min(k_total);
        for b in 0..x.rows {
            let xr = &x.row(b)[k0..k1];
            let or = out.row_mut(b);
            for (dk, &a) in xr.iter().enumerate() {
                if a != 0.0 {
                    axpy(a, w.row(row_offset + k0 + dk), or);
                }
            }
        }
        k0 = k1;
    }
}

/// Copies `bias` into every row of `out`.
pub(crate) fn broadcast_rows(bias: &[f32], out: &mut Matrix) {
    for b in 0..out.rows {
        out.row_mut(b).copy_from_slice(bias);
    }
}
