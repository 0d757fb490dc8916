//! The FOAM update.
//!
//! Per step, for a gradient `G` of shape `m × n` and fold level `l`:
//!
//! ```text
//! G~ = fold(G)                         (m × ceil(n / 2^l))
//! R  = G - unfold(G~)
//! M~ = b1 M~ + (1 - b1) G~
//! V~ = b2 V~ + (1 - b2) G~^2
//! M  = unfold(M~) + R                  (R only if residual_first)
//! V  = unfold(V~) + R^2                (R^2 only if residual_second)
//! W  = W - lr_t * alpha * M / (sqrt(V) + eps)
//! ```
//!
//! Only `M~` and `V~` persist between steps, so the state is `2^(l-1)` times
//! smaller than Adam's. The residual is recomputed from the current gradient
//! and dropped afterwards. At `l = 0` fold and unfold are identities, the
//! residual is zero, and the step reduces to Adam with step `lr_t * alpha`.

use serde::{Deserialize, Serialize};

use crate::error::{FoamError, Result};
use crate::fold::{fold, residual_from_folded, unfold, FoldSpec};
use crate::matrix::Matrix;
use crate::quant::Companding;

use super::adam::{apply_update, check_lr, check_shape, direction, ema, square};
use super::moment::Moment;
use super::OptimizerConfig;

/// Compressed moments for one FOAM-routed parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoamState {
    pub(crate) m_tilde: Moment,
    pub(crate) v_tilde: Moment,
    pub(crate) spec: FoldSpec,
    pub(crate) step: u64,
}

impl FoamState {
    /// Zero-initialized state for a parameter with `rows` rows, folded
    /// according to `spec`.
    pub fn new(rows: usize, spec: FoldSpec, cfg: &OptimizerConfig) -> Result<Self> {
        let k = spec.folded_cols();
        Ok(FoamState {
            m_tilde: Moment::zeros(rows, k, cfg, Companding::Linear)?,
            v_tilde: Moment::zeros(rows, k, cfg, Companding::Sqrt)?,
            spec,
            step: 0,
        })
    }

    pub fn spec(&self) -> &FoldSpec {
        &self.spec
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn rows(&self) -> usize {
        self.m_tilde.shape().0
    }

    /// Shape of the parameter this state belongs to.
    pub fn param_shape(&self) -> (usize, usize) {
        (self.rows(), self.spec.input_cols())
    }

    pub fn compressed_first_moment(&self) -> Matrix {
        self.m_tilde.load()
    }

    pub fn compressed_second_moment(&self) -> Matrix {
        self.v_tilde.load()
    }

    /// Number of stored moment entries (both moments).
    pub fn state_elements(&self) -> usize {
        let (r, c) = self.m_tilde.shape();
        2 * r * c
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let expected = (self.rows(), self.spec.folded_cols());
        if self.m_tilde.shape() != expected || self.v_tilde.shape() != expected {
            return Err(FoamError::State(format!(
                "FOAM moments must be {expected:?}, got {:?} / {:?}",
                self.m_tilde.shape(),
                self.v_tilde.shape()
            )));
        }
        self.m_tilde.validate()?;
        self.v_tilde.validate()?;
        if self.v_tilde.load().as_slice().iter().any(|&v| v < 0.0) {
            return Err(FoamError::State("negative second moment".into()));
        }
        Ok(())
    }

    /// Advances the compressed moments with `g` and returns the unfolded,
    /// residual-corrected moments together with the update direction.
    pub(crate) fn advance(&mut self, g: &Matrix, cfg: &OptimizerConfig) -> Result<FoamMoments> {
        check_shape("foam", self.param_shape(), g)?;
        let g_folded = fold(g, &self.spec)?;
        let resid = residual_from_folded(g, &g_folded, &self.spec)?;

        let m_tilde = ema(&self.m_tilde.load(), cfg.beta1, &g_folded)?;
        let v_tilde = ema(&self.v_tilde.load(), cfg.beta2, &square(&g_folded))?;
        self.m_tilde = Moment::store(m_tilde, cfg, Companding::Linear)?;
        self.v_tilde = Moment::store(v_tilde, cfg, Companding::Sqrt)?;
        self.step += 1;

        let mut first = unfold(&self.m_tilde.load(), &self.spec)?;
        if cfg.residual_first {
            first = first.add(&resid)?;
        }
        let mut second = unfold(&self.v_tilde.load(), &self.spec)?;
        if cfg.residual_second {
            second = second.add(&square(&resid))?;
        }
        let dir = direction(&first, &second, cfg)?;
        Ok(FoamMoments {
            first,
            second,
            residual: resid,
            direction: dir,
        })
    }
}

/// Per-step intermediate values of a FOAM update.
#[derive(Clone, Debug, PartialEq)]
pub struct FoamMoments {
    /// Unfolded first moment `M`.
    pub first: Matrix,
    /// Unfolded second moment `V`.
    pub second: Matrix,
    /// Fold residual `R` of the current gradient.
    pub residual: Matrix,
    /// `M / denom(V)`.
    pub direction: Matrix,
}

/// Result of [`foam_step_detailed`].
#[derive(Clone, Debug, PartialEq)]
pub struct FoamUpdate {
    pub weights: Matrix,
    pub moments: FoamMoments,
}

/// One FOAM step with step size `lr_t * cfg.alpha`.
pub fn foam_step(
    w: &Matrix,
    g: &Matrix,
    state: &mut FoamState,
    cfg: &OptimizerConfig,
    lr_t: f64,
) -> Result<Matrix> {
    foam_step_detailed(w, g, state, cfg, lr_t).map(|u| u.weights)
}

/// As [`foam_step`], also returning the unfolded moments and residual.
pub fn foam_step_detailed(
    w: &Matrix,
    g: &Matrix,
    state: &mut FoamState,
    cfg: &OptimizerConfig,
    lr_t: f64,
) -> Result<FoamUpdate> {
    foam_step_scaled(w, g, state, cfg, lr_t * cfg.alpha)
}

/// FOAM step with an already-scaled step size.
pub(crate) fn foam_step_scaled(
    w: &Matrix,
    g: &Matrix,
    state: &mut FoamState,
    cfg: &OptimizerConfig,
    lr_eff: f64,
) -> Result<FoamUpdate> {
    check_lr(lr_eff)?;
    check_shape("foam_step", w.shape(), g)?;
    let moments = state.advance(g, cfg)?;
    let weights = apply_update(w, &moments.direction, lr_eff, cfg.weight_decay)?;
    Ok(FoamUpdate { weights, moments })
}

/// Fold level used by FOAM-Mini: `floor(log2(hidden_dim))`, leaving one or
/// two stored entries per row.
pub fn foam_mini_level(hidden_dim: usize) -> u32 {
    hidden_dim.max(1).ilog2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::adam::{adam_step, AdamState};

    fn cfg() -> OptimizerConfig {
        OptimizerConfig {
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            alpha: 1.0,
            level: 1,
            ..Default::default()
        }
    }

    #[test]
    fn desk_example() {
        let cfg = cfg();
        let spec = FoldSpec::new(1, 4).unwrap();
        let mut st = FoamState::new(1, spec, &cfg).unwrap();
        let w = Matrix::zeros(1, 4);
        let g = Matrix::from_rows(&[&[1.0, 3.0, 5.0, 7.0]]).unwrap();
        let up = foam_step_detailed(&w, &g, &mut st, &cfg, 0.01).unwrap();

        let close = |a: &Matrix, b: &[f64]| {
            a.as_slice().iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
        };
        assert!(close(&up.moments.residual, &[-1.0, 1.0, -1.0, 1.0]));
        assert!(close(&st.compressed_first_moment(), &[0.2, 0.6]));
        assert!(close(&st.compressed_second_moment(), &[0.2, 1.8]));
        assert!(close(&up.moments.first, &[-0.8, 1.2, -0.4, 1.6]));
        assert!(close(&up.moments.second, &[1.2, 1.2, 2.8, 2.8]));
        // 0.01 * 0.8 / (sqrt(1.2) + 1e-8)
        assert!((up.weights.get(0, 0) - 0.0073030).abs() < 1e-7);
    }

    #[test]
    fn level_zero_matches_adam_with_scaled_step() {
        let cfg = OptimizerConfig { level: 0, alpha: 0.25, ..cfg() };
        let g = Matrix::from_rows(&[&[0.3, -1.2, 2.0], &[0.0, 5.5, -0.1]]).unwrap();
        let w = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]]).unwrap();
        let mut fs = FoamState::new(2, FoldSpec::new(0, 3).unwrap(), &cfg).unwrap();
        let mut ad = AdamState::new(2, 3, &cfg).unwrap();
        let wf = foam_step(&w, &g, &mut fs, &cfg, 0.1).unwrap();
        let wa = adam_step(&w, &g, &mut ad, &cfg, 0.1 * 0.25).unwrap();
        assert!(wf.max_abs_diff(&wa).unwrap() <= 1e-12);
    }

    #[test]
    fn zero_beta1_with_residual_recovers_gradient() {
        let cfg = OptimizerConfig { beta1: 0.0, level: 2, ..cfg() };
        let g = Matrix::from_rows(&[&[0.5, -1.0, 2.0, 4.0, 3.0, -7.0]]).unwrap();
        let mut st = FoamState::new(1, FoldSpec::new(2, 6).unwrap(), &cfg).unwrap();
        let up = foam_step_detailed(&Matrix::zeros(1, 6), &g, &mut st, &cfg, 0.1).unwrap();
        assert!(up.moments.first.max_abs_diff(&g).unwrap() < 1e-15);
    }

    #[test]
    fn residual_flags_off_gives_block_constant_moments() {
        let cfg = OptimizerConfig {
            residual_first: false,
            residual_second: false,
            level: 1,
            ..cfg()
        };
        let g = Matrix::from_rows(&[&[1.0, 3.0, 5.0, 7.0]]).unwrap();
        let mut st = FoamState::new(1, FoldSpec::new(1, 4).unwrap(), &cfg).unwrap();
        let up = foam_step_detailed(&Matrix::zeros(1, 4), &g, &mut st, &cfg, 0.1).unwrap();
        let w = up.weights.as_slice();
        assert_eq!(w[0], w[1]);
        assert_eq!(w[2], w[3]);
    }

    #[test]
    fn state_is_compressed() {
        let cfg = cfg();
        let st = FoamState::new(4, FoldSpec::new(2, 8).unwrap(), &cfg).unwrap();
        assert_eq!(st.state_elements(), 16);
        assert_eq!(st.param_shape(), (4, 8));
    }

    #[test]
    fn shape_mismatch() {
        let cfg = cfg();
        let mut st = FoamState::new(1, FoldSpec::new(1, 4).unwrap(), &cfg).unwrap();
        let w = Matrix::zeros(1, 4);
        assert!(foam_step(&w, &Matrix::zeros(1, 5), &mut st, &cfg, 0.1).is_err());
        assert!(foam_step(&w, &Matrix::zeros(2, 4), &mut st, &cfg, 0.1).is_err());
    }

    #[test]
    fn mini_levels() {
        assert_eq!(foam_mini_level(512), 9);
        assert_eq!(foam_mini_level(1), 0);
        assert_eq!(foam_mini_level(768), 9);
        assert_eq!(FoldSpec::new(foam_mini_level(768), 768).unwrap().folded_cols(), 2);
        for h in 1..2000 {
            let k = FoldSpec::new(foam_mini_level(h), h).unwrap().folded_cols();
            assert!(k == 1 || k == 2, "hidden {h} folds to {k}");
        }
    }
}
