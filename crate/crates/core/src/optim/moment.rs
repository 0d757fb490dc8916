use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::Matrix;
use crate::quant::{Companding, QuantizedMatrix};

use super::OptimizerConfig;

/// Storage for one moment matrix, dense or 8-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "storage", rename_all = "snake_case")]
pub enum Moment {
    Full { values: Matrix },
    Int8 { quantized: QuantizedMatrix },
}

impl Moment {
    pub(crate) fn zeros(rows: usize, cols: usize, cfg: &OptimizerConfig, companding: Companding) -> Result<Self> {
        Moment::store(Matrix::zeros(rows, cols), cfg, companding)
    }

    pub(crate) fn store(values: Matrix, cfg: &OptimizerConfig, companding: Companding) -> Result<Self> {
        if cfg.quant8 {
            Ok(Moment::Int8 {
                quantized: QuantizedMatrix::encode(&values, cfg.quant_block_len, companding)?,
            })
        } else {
            Ok(Moment::Full { values })
        }
    }

    /// Dense view of the stored values (dequantized when 8-bit).
    pub fn load(&self) -> Matrix {
        match self {
            Moment::Full { values } => values.clone(),
            Moment::Int8 { quantized } => quantized.decode(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Moment::Full { values } => values.shape(),
            Moment::Int8 { quantized } => quantized.shape(),
        }
    }

    pub fn is_quantized(&self) -> bool {
        matches!(self, Moment::Int8 { .. })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            Moment::Full { .. } => Ok(()),
            Moment::Int8 { quantized } => quantized.validate(),
        }
    }
}
