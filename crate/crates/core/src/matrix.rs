//! Dense row-major `f64` matrices.
//!
//! Every weight, gradient and optimizer moment in the crate is a [`Matrix`].
//! Vectors (biases) are `1 × n` matrices. Values are never mutated through the
//! public API: each operation returns a fresh matrix, and constructors reject
//! NaN/Inf so every matrix that exists is finite.

use serde::{Deserialize, Serialize};

use crate::error::{FoamError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = FoamError;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        Matrix::new(raw.rows, raw.cols, raw.data)
    }
}

/// Binary elementwise operator for [`Matrix::elementwise`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl Matrix {
    /// Builds a matrix from row-major data.
    ///
    /// Fails if either dimension is zero, the length is not `rows * cols`, or
    /// any entry is NaN/Inf.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(FoamError::Domain(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(FoamError::Domain(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(FoamError::NonFinite(format!(
                "matrix entry ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Handy in tests and docs.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(FoamError::Domain("ragged rows".into()));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    /// A `1 × n` matrix.
    pub fn row_vector(values: Vec<f64>) -> Result<Self> {
        Matrix::new(1, values.len(), values)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        assert!(value.is_finite(), "fill value must be finite");
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            out.data[i * n + i] = 1.0;
        }
        out
    }

    /// Internal constructor for kernels whose output is finite by
    /// construction. Checked in debug builds only.
    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        debug_assert!(
            data.iter().all(|v| v.is_finite()),
            "kernel produced a non-finite entry"
        );
        Matrix { rows, cols, data }
    }

    /// Like [`Matrix::from_parts`] but always checks finiteness. Used where
    /// overflow is possible (optimizer updates, task gradients).
    pub(crate) fn from_parts_checked(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        what: &str,
    ) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(FoamError::NonFinite(what.to_string()));
        }
        Ok(Matrix { rows, cols, data })
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix::from_parts(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: f64) -> Matrix {
        self.map(|v| c * v)
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.data[r * self.cols + c]);
            }
        }
        Matrix::from_parts(self.cols, self.rows, data)
    }

    fn check_same_shape(&self, other: &Matrix, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(FoamError::Shape {
                op,
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }

    pub fn elementwise(&self, other: &Matrix, op: ElementwiseOp) -> Result<Matrix> {
        self.check_same_shape(other, "elementwise")?;
        if op == ElementwiseOp::Div && other.data.contains(&0.0) {
            return Err(FoamError::Domain("division by a zero entry".into()));
        }
        let f = match op {
            ElementwiseOp::Add => |a: f64, b: f64| a + b,
            ElementwiseOp::Sub => |a: f64, b: f64| a - b,
            ElementwiseOp::Mul => |a: f64, b: f64| a * b,
            ElementwiseOp::Div => |a: f64, b: f64| a / b,
        };
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Matrix::from_parts_checked(self.rows, self.cols, data, "elementwise result")
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.elementwise(other, ElementwiseOp::Add)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.elementwise(other, ElementwiseOp::Sub)
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        self.elementwise(other, ElementwiseOp::Mul)
    }

    pub fn div(&self, other: &Matrix) -> Result<Matrix> {
        self.elementwise(other, ElementwiseOp::Div)
    }

    /// `alpha * self + beta * other`, the shape of every moment recursion.
    pub fn scale_add(&self, alpha: f64, other: &Matrix, beta: f64) -> Result<Matrix> {
        self.check_same_shape(other, "scale_add")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| alpha * a + beta * b)
            .collect();
        Matrix::from_parts_checked(self.rows, self.cols, data, "scale_add result")
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Matrix) -> Result<f64> {
        self.check_same_shape(other, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// `<a, b> / (|a| |b|)`. Errors when either norm is zero.
    pub fn cosine_similarity(&self, other: &Matrix) -> Result<f64> {
        let dot = self.dot(other)?;
        let na = self.frobenius_norm();
        let nb = other.frobenius_norm();
        if na == 0.0 || nb == 0.0 {
            return Err(FoamError::Domain(
                "cosine similarity of a zero-norm matrix".into(),
            ));
        }
        Ok((dot / (na * nb)).clamp(-1.0, 1.0))
    }

    /// Plain triple-loop product. Only used for small oracle matrices.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(FoamError::Shape {
                op: "matmul",
                expected: (self.cols, other.cols),
                actual: other.shape(),
            });
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                let out = &mut data[i * n..(i + 1) * n];
                for (o, &b) in out.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Matrix::from_parts_checked(m, n, data, "matmul result")
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> Result<f64> {
        self.check_same_shape(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols))
            .map(|i| self.data[i * self.cols + i])
            .sum()
    }
}
