use serde::{Deserialize, Serialize};

use crate::error::{FoamError, Result};
use crate::matrix::Matrix;
use crate::quant::Companding;

use super::adam::{apply_update, check_lr, check_shape, ema};
use super::moment::Moment;
use super::OptimizerConfig;

/// Adam-Mini-style baseline: full first moment, one shared second-moment
/// scalar per weight matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamMiniState {
    pub(crate) m: Moment,
    pub(crate) v: f64,
    pub(crate) step: u64,
}

impl AdamMiniState {
    pub fn new(rows: usize, cols: usize, cfg: &OptimizerConfig) -> Result<Self> {
        Ok(AdamMiniState {
            m: Moment::zeros(rows, cols, cfg, Companding::Linear)?,
            v: 0.0,
            step: 0,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn shared_second_moment(&self) -> f64 {
        self.v
    }

    pub fn first_moment(&self) -> Matrix {
        self.m.load()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.m.shape()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.v.is_finite() && self.v >= 0.0) {
            return Err(FoamError::State("shared second moment must be finite and >= 0".into()));
        }
        self.m.validate()
    }

    pub(crate) fn advance(&mut self, g: &Matrix, cfg: &OptimizerConfig) -> Result<Matrix> {
        check_shape("adam_mini", self.shape(), g)?;
        let mean_sq = g.squared_norm() / g.len() as f64;
        let m = ema(&self.m.load(), cfg.beta1, g)?;
        self.m = Moment::store(m, cfg, Companding::Linear)?;
        self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * mean_sq;
        self.step += 1;
        let denom = cfg.denom(self.v);
        Ok(self.m.load().map(|mi| mi / denom))
    }
}

/// One Adam-Mini step: the second moment is the EMA of `mean(g^2)`.
pub fn adam_mini_step(
    w: &Matrix,
    g: &Matrix,
    state: &mut AdamMiniState,
    cfg: &OptimizerConfig,
    lr_t: f64,
) -> Result<Matrix> {
    check_lr(lr_t)?;
    check_shape("adam_mini_step", w.shape(), g)?;
    let dir = state.advance(g, cfg)?;
    apply_update(w, &dir, lr_t, cfg.weight_decay)
}
