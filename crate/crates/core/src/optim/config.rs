use serde::{Deserialize, Serialize};

use crate::error::{FoamError, Result};
use crate::quant::DEFAULT_BLOCK_LEN;

/// Where `eps` enters the adaptive denominator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenomConvention {
    /// `sqrt(v) + eps`, as in the FOAM pseudocode. Default.
    #[default]
    SqrtThenEps,
    /// `sqrt(v + eps)`.
    EpsInsideSqrt,
}

impl DenomConvention {
    #[inline]
    pub fn apply(self, v: f64, eps: f64) -> f64 {
        match self {
            DenomConvention::SqrtThenEps => v.sqrt() + eps,
            DenomConvention::EpsInsideSqrt => (v + eps).sqrt(),
        }
    }
}

/// Hyperparameters shared by every optimizer in the crate.
///
/// Defaults follow common LLM practice: `beta1 = 0.9`, `beta2 = 0.95`,
/// `eps = 1e-8`, `alpha = 0.25`. There is no bias correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Base step size, used by the `constant` schedule.
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Step-size multiplier for FOAM-routed parameters.
    pub alpha: f64,
    /// Fold level `l`; blocks hold `2^l` entries.
    pub level: u32,
    /// Add the current residual to the unfolded first moment.
    pub residual_first: bool,
    /// Add the squared residual to the unfolded second moment.
    pub residual_second: bool,
    pub denom_convention: DenomConvention,
    /// Decoupled decay `w <- w (1 - lr * weight_decay)` before the update.
    pub weight_decay: f64,
    /// Store moments as 8-bit block-absmax codes.
    pub quant8: bool,
    pub quant_block_len: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            alpha: 0.25,
            level: 2,
            residual_first: true,
            residual_second: true,
            denom_convention: DenomConvention::SqrtThenEps,
            weight_decay: 0.0,
            quant8: false,
            quant_block_len: DEFAULT_BLOCK_LEN,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(FoamError::config(name, format!("must be a positive finite number, got {v}")))
            }
        };
        positive("lr", self.lr)?;
        positive("eps", self.eps)?;
        positive("alpha", self.alpha)?;
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(FoamError::config(name, format!("must lie in [0, 1), got {beta}")));
            }
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(FoamError::config(
                "weight_decay",
                format!("must be non-negative, got {}", self.weight_decay),
            ));
        }
        if self.level > crate::fold::MAX_LEVEL {
            return Err(FoamError::config(
                "level",
                format!("must be at most {}", crate::fold::MAX_LEVEL),
            ));
        }
        if self.quant_block_len == 0 {
            return Err(FoamError::config("quant_block_len", "must be positive"));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn denom(&self, v: f64) -> f64 {
        self.denom_convention.apply(v, self.eps)
    }
}
