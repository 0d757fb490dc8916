//! Blocked fold, unfold and residual operators.
//!
//! Folding at level `l` replaces every run of `2^l` adjacent entries in a row
//! with their mean; unfolding copies each mean back over its block. Their
//! composition is the orthogonal projector `P = A E` onto row-wise
//! block-constant matrices, and the residual `G - G P` is what the projection
//! throws away.
//!
//! The kernels below work in `O(mn)` with running block sums. The dense
//! operator matrices `A`, `E` and `P` are built only by the `build_dense_*`
//! constructors, which exist for oracle tests and the projector checks in
//! [`crate::diagnostics`].
//!
//! When `2^l` does not divide the column count, the last block is shorter and
//! is averaged over its true length. `P` stays symmetric and idempotent on the
//! unpadded space.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{FoamError, Result};
use crate::matrix::Matrix;

/// Largest supported fold level; `2^MAX_LEVEL` must fit comfortably in `usize`.
pub const MAX_LEVEL: u32 = 40;

/// Geometry of a fold along the column axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawFoldSpec", into = "RawFoldSpec")]
pub struct FoldSpec {
    level: u32,
    block_size: usize,
    input_cols: usize,
    folded_cols: usize,
    last_block_size: usize,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFoldSpec {
    level: u32,
    input_cols: usize,
}

impl TryFrom<RawFoldSpec> for FoldSpec {
    type Error = FoamError;

    fn try_from(raw: RawFoldSpec) -> Result<Self> {
        FoldSpec::new(raw.level, raw.input_cols)
    }
}

impl From<FoldSpec> for RawFoldSpec {
    fn from(spec: FoldSpec) -> Self {
        RawFoldSpec {
            level: spec.level,
            input_cols: spec.input_cols,
        }
    }
}

impl FoldSpec {
    pub fn new(level: u32, input_cols: usize) -> Result<Self> {
        if input_cols == 0 {
            return Err(FoamError::Domain("fold input must have at least one column".into()));
        }
        if level > MAX_LEVEL {
            return Err(FoamError::Domain(format!(
                "fold level {level} exceeds the maximum of {MAX_LEVEL}"
            )));
        }
        let block_size = 1usize << level;
        let folded_cols = input_cols.div_ceil(block_size);
        let last_block_size = input_cols - (folded_cols - 1) * block_size;
        Ok(FoldSpec {
            level,
            block_size,
            input_cols,
            folded_cols,
            last_block_size,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn input_cols(&self) -> usize {
        self.input_cols
    }

    pub fn folded_cols(&self) -> usize {
        self.folded_cols
    }

    pub fn last_block_size(&self) -> usize {
        self.last_block_size
    }

    /// Column range of block `j` in the unfolded matrix.
    pub fn block_range(&self, j: usize) -> Range<usize> {
        let start = j * self.block_size;
        start..(start + self.block_size).min(self.input_cols)
    }

    /// Number of columns in block `j`.
    pub fn block_len(&self, j: usize) -> usize {
        if j + 1 == self.folded_cols {
            self.last_block_size
        } else {
            self.block_size
        }
    }

    /// True when at least one block holds more than one column, i.e. the
    /// fold actually discards information.
    pub fn is_compressing(&self) -> bool {
        self.folded_cols < self.input_cols
    }

    fn check_input(&self, g: &Matrix, op: &'static str) -> Result<()> {
        if g.cols() != self.input_cols {
            return Err(FoamError::Shape {
                op,
                expected: (g.rows(), self.input_cols),
                actual: g.shape(),
            });
        }
        Ok(())
    }
}

/// Block means along each row: `G A`.
pub fn fold(g: &Matrix, spec: &FoldSpec) -> Result<Matrix> {
    spec.check_input(g, "fold")?;
    let k = spec.folded_cols;
    let mut data = Vec::with_capacity(g.rows() * k);
    for r in 0..g.rows() {
        let row = g.row(r);
        for j in 0..k {
            let block = &row[spec.block_range(j)];
            let sum: f64 = block.iter().sum();
            data.push(sum / block.len() as f64);
        }
    }
    Ok(Matrix::from_parts(g.rows(), k, data))
}

/// Block replication: `C E`.
pub fn unfold(c: &Matrix, spec: &FoldSpec) -> Result<Matrix> {
    if c.cols() != spec.folded_cols {
        return Err(FoamError::Shape {
            op: "unfold",
            expected: (c.rows(), spec.folded_cols),
            actual: c.shape(),
        });
    }
    let n = spec.input_cols;
    let mut data = Vec::with_capacity(c.rows() * n);
    for r in 0..c.rows() {
        for (j, &v) in c.row(r).iter().enumerate() {
            data.extend(std::iter::repeat_n(v, spec.block_len(j)));
        }
    }
    Ok(Matrix::from_parts(c.rows(), n, data))
}

/// `G - unfold(fold(G))`: each entry minus its block mean.
pub fn residual(g: &Matrix, spec: &FoldSpec) -> Result<Matrix> {
    let folded = fold(g, spec)?;
    residual_from_folded(g, &folded, spec)
}

/// Residual when the folded gradient is already at hand.
pub(crate) fn residual_from_folded(g: &Matrix, folded: &Matrix, spec: &FoldSpec) -> Result<Matrix> {
    spec.check_input(g, "residual")?;
    let mut data = Vec::with_capacity(g.len());
    for r in 0..g.rows() {
        let row = g.row(r);
        let means = folded.row(r);
        for (j, &mean) in means.iter().enumerate() {
            data.extend(row[spec.block_range(j)].iter().map(|&v| v - mean));
        }
    }
    Ok(Matrix::from_parts(g.rows(), g.cols(), data))
}

/// Dense `n × folded_cols` fold operator `A`.
pub fn build_dense_fold(spec: &FoldSpec) -> Matrix {
    let (n, k) = (spec.input_cols, spec.folded_cols);
    let mut data = vec![0.0; n * k];
    for j in 0..k {
        let w = 1.0 / spec.block_len(j) as f64;
        for i in spec.block_range(j) {
            data[i * k + j] = w;
        }
    }
    Matrix::from_parts(n, k, data)
}

/// Dense `folded_cols × n` unfold operator `E` with 0/1 entries.
pub fn build_dense_unfold(spec: &FoldSpec) -> Matrix {
    let (n, k) = (spec.input_cols, spec.folded_cols);
    let mut data = vec![0.0; k * n];
    for j in 0..k {
        for i in spec.block_range(j) {
            data[j * n + i] = 1.0;
        }
    }
    Matrix::from_parts(k, n, data)
}

/// Dense `n × n` projector `P = A E`.
pub fn projector(spec: &FoldSpec) -> Matrix {
    build_dense_fold(spec)
        .matmul(&build_dense_unfold(spec))
        .expect("A and E have compatible shapes by construction")
}
