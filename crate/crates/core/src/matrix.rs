//! Row-major dense matrix.
//!
//! Batches are stacked as rows: a batch of `n` feature vectors of width `d`
//! is an `n x d` matrix. Nothing here is tuned for speed beyond cache-friendly
//! loop order; the workloads are desk scale.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense matrix with row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    /// Builds a matrix from row-major data. Errors when the data length does
    /// not equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                format!("{rows}x{cols} = {} entries", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from slices of equal-length rows.
    pub fn from_rows(rows: &[&[F]]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::shape(
                    "Matrix::from_rows",
                    format!("row 0 has {n_cols} entries"),
                    format!("row {i} has {} entries", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> F {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: F) {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[F] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [F] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// `self (n x m) * other (m x p) -> n x p`.
    pub fn matmul(&self, other: &Matrix<F>) -> Result<Matrix<F>> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "Matrix::matmul",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &a) in a_row.iter().enumerate() {
                let b_row = other.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^T (m x n) * other (m x p) -> n x p`, without materializing the
    /// transpose.
    pub fn transpose_matmul(&self, other: &Matrix<F>) -> Result<Matrix<F>> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "Matrix::transpose_matmul",
                format!("{}x{} (transposed)", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                let out_row = out.row_mut(i);
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self (n x m) * other^T (p x m) -> n x p`, without materializing the
    /// transpose.
    pub fn matmul_transpose(&self, other: &Matrix<F>) -> Result<Matrix<F>> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "Matrix::matmul_transpose",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{} (transposed)", other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (j, o) in out_row.iter_mut().enumerate() {
                let b_row = other.row(j);
                let mut acc = F::zero();
                for (&a, &b) in a_row.iter().zip(b_row.iter()) {
                    acc = acc + a * b;
                }
                *o = acc;
            }
        }
        Ok(out)
    }

    /// Adds `bias` (length = cols) to every row.
    pub fn add_row_vector(&mut self, bias: &[F]) -> Result<()> {
        if bias.len() != self.cols {
            return Err(Error::shape(
                "Matrix::add_row_vector",
                format!("{} cols", self.cols),
                format!("{} bias entries", bias.len()),
            ));
        }
        for r in 0..self.rows {
            for (v, &b) in self.row_mut(r).iter_mut().zip(bias.iter()) {
                *v = *v + b;
            }
        }
        Ok(())
    }

    /// Sums each column (used for bias gradients).
    pub fn column_sums(&self) -> Vec<F> {
        let mut sums = vec![F::zero(); self.cols];
        for r in 0..self.rows {
            for (s, &v) in sums.iter_mut().zip(self.row(r).iter()) {
                *s = *s + v;
            }
        }
        sums
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
