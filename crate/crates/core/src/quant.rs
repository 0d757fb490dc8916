//! Block-wise absmax 8-bit quantization for optimizer moments.
//!
//! Values are cut into blocks of `block_len` (64 by default). Each block keeps
//! its absolute maximum `a` and one signed code per value,
//! `code = round(v / (a / 127))` with ties away from zero, so the absmax
//! element always maps to `±127` and dequantizes exactly.
//!
//! [`QuantizedMatrix`] wraps the codec for whole moment matrices. Second
//! moments are stored through [`Companding::Sqrt`]: the codes hold `sqrt(v)`,
//! which keeps the dynamic range of the stored quantity equal to that of the
//! gradient instead of its square. With a linear code small `v` entries
//! collapse to zero while the matching first-moment code does not, and the
//! update `m / (sqrt(v) + eps)` explodes.

use serde::{Deserialize, Serialize};

use crate::error::{FoamError, Result};
use crate::matrix::Matrix;

pub const DEFAULT_BLOCK_LEN: usize = 64;
pub const CODE_MAX: i8 = 127;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantBlock {
    absmax: f64,
    codes: Vec<i8>,
}

impl QuantBlock {
    fn encode(values: &[f64]) -> Self {
        let absmax = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if absmax == 0.0 {
            return QuantBlock {
                absmax,
                codes: vec![0; values.len()],
            };
        }
        let scale = absmax / f64::from(CODE_MAX);
        let codes = values
            .iter()
            .map(|&v| {
                let q = (v / scale).round();
                q.clamp(-f64::from(CODE_MAX), f64::from(CODE_MAX)) as i8
            })
            .collect();
        QuantBlock { absmax, codes }
    }

    /// Quantization step, `absmax / 127`.
    pub fn scale(&self) -> f64 {
        self.absmax / f64::from(CODE_MAX)
    }

    pub fn absmax(&self) -> f64 {
        self.absmax
    }

    pub fn codes(&self) -> &[i8] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    fn decode_into(&self, out: &mut Vec<f64>) {
        out.extend(
            self.codes
                .iter()
                .map(|&c| f64::from(c) / f64::from(CODE_MAX) * self.absmax),
        );
    }
}

/// Quantize a sequence into blocks of at most `block_len` values.
pub fn quantize(values: &[f64], block_len: usize) -> Result<Vec<QuantBlock>> {
    if block_len == 0 {
        return Err(FoamError::Domain("quantization block length must be positive".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(FoamError::NonFinite("quantize input".into()));
    }
    Ok(values.chunks(block_len).map(QuantBlock::encode).collect())
}

pub fn dequantize(blocks: &[QuantBlock]) -> Vec<f64> {
    let mut out = Vec::with_capacity(blocks.iter().map(QuantBlock::len).sum());
    for b in blocks {
        b.decode_into(&mut out);
    }
    out
}

/// Map applied before quantizing and inverted after dequantizing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Companding {
    Linear,
    /// Stores `sqrt(v)`; inputs must be non-negative.
    Sqrt,
}

/// A quantized moment matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedMatrix {
    rows: usize,
    cols: usize,
    block_len: usize,
    companding: Companding,
    blocks: Vec<QuantBlock>,
}

impl QuantizedMatrix {
    pub fn encode(m: &Matrix, block_len: usize, companding: Companding) -> Result<Self> {
        let blocks = match companding {
            Companding::Linear => quantize(m.as_slice(), block_len)?,
            Companding::Sqrt => {
                if m.as_slice().iter().any(|&v| v < 0.0) {
                    return Err(FoamError::Domain(
                        "sqrt companding needs non-negative values".into(),
                    ));
                }
                let roots: Vec<f64> = m.as_slice().iter().map(|v| v.sqrt()).collect();
                quantize(&roots, block_len)?
            }
        };
        let out = QuantizedMatrix {
            rows: m.rows(),
            cols: m.cols(),
            block_len,
            companding,
            blocks,
        };
        debug_assert!(out.within_rounding_bound(m), "quantization error above scale/2");
        Ok(out)
    }

    pub fn decode(&self) -> Matrix {
        let mut values = dequantize(&self.blocks);
        if self.companding == Companding::Sqrt {
            values.iter_mut().for_each(|v| *v *= *v);
        }
        Matrix::from_parts(self.rows, self.cols, values)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn blocks(&self) -> &[QuantBlock] {
        &self.blocks
    }

    pub fn companding(&self) -> Companding {
        self.companding
    }

    /// Checks `|x - x̂| <= scale/2` per element in the companded domain.
    pub fn within_rounding_bound(&self, original: &Matrix) -> bool {
        let source: Vec<f64> = match self.companding {
            Companding::Linear => original.as_slice().to_vec(),
            Companding::Sqrt => original.as_slice().iter().map(|v| v.sqrt()).collect(),
        };
        let decoded = dequantize(&self.blocks);
        source
            .chunks(self.block_len)
            .zip(&self.blocks)
            .enumerate()
            .all(|(bi, (chunk, block))| {
                let bound = block.scale() / 2.0 + 1e-15;
                chunk
                    .iter()
                    .zip(&decoded[bi * self.block_len..])
                    .all(|(x, y)| (x - y).abs() <= bound)
            })
    }

    /// Validates structure after deserialization.
    pub(crate) fn validate(&self) -> Result<()> {
        let expected = self.rows * self.cols;
        let got: usize = self.blocks.iter().map(QuantBlock::len).sum();
        let block_ok = self.blocks.iter().all(|b| {
            b.len() <= self.block_len
                && b.absmax.is_finite()
                && b.absmax >= 0.0
                && b.codes.iter().all(|&c| c >= -CODE_MAX)
                && (b.absmax > 0.0 || b.codes.iter().all(|&c| c == 0))
        });
        if got != expected || self.block_len == 0 || !block_ok {
            return Err(FoamError::State("malformed quantized matrix".into()));
        }
        Ok(())
    }
}
