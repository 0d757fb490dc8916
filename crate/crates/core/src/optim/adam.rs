use serde::{Deserialize, Serialize};

use crate::error::{FoamError, Result};
use crate::matrix::Matrix;
use crate::quant::Companding;

use super::moment::Moment;
use super::OptimizerConfig;

/// Full-size Adam moments for one parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub(crate) m: Moment,
    pub(crate) v: Moment,
    pub(crate) step: u64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, cfg: &OptimizerConfig) -> Result<Self> {
        Ok(AdamState {
            m: Moment::zeros(rows, cols, cfg, Companding::Linear)?,
            v: Moment::zeros(rows, cols, cfg, Companding::Sqrt)?,
            step: 0,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> Matrix {
        self.m.load()
    }

    pub fn second_moment(&self) -> Matrix {
        self.v.load()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.m.shape()
    }

    /// Advances the moments with `g` and returns the direction
    /// `m / denom(v)` without touching any weights.
    pub(crate) fn advance(&mut self, g: &Matrix, cfg: &OptimizerConfig) -> Result<Matrix> {
        check_shape("adam", self.shape(), g)?;
        let m = ema(&self.m.load(), cfg.beta1, g)?;
        let v = ema(&self.v.load(), cfg.beta2, &square(g))?;
        self.m = Moment::store(m, cfg, Companding::Linear)?;
        self.v = Moment::store(v, cfg, Companding::Sqrt)?;
        self.step += 1;
        // Use the stored (possibly dequantized) values so that the update
        // sees exactly what a resumed run would see.
        direction(&self.m.load(), &self.v.load(), cfg)
    }
}

/// One Adam step without bias correction:
/// `m <- b1 m + (1-b1) g`, `v <- b2 v + (1-b2) g^2`,
/// `w <- w - lr_t * m / (sqrt(v) + eps)`.
pub fn adam_step(
    w: &Matrix,
    g: &Matrix,
    state: &mut AdamState,
    cfg: &OptimizerConfig,
    lr_t: f64,
) -> Result<Matrix> {
    adam_step_with_direction(w, g, state, cfg, lr_t).map(|(w, _)| w)
}

/// As [`adam_step`], also returning the update direction `m / denom(v)`.
pub fn adam_step_with_direction(
    w: &Matrix,
    g: &Matrix,
    state: &mut AdamState,
    cfg: &OptimizerConfig,
    lr_t: f64,
) -> Result<(Matrix, Matrix)> {
    check_lr(lr_t)?;
    check_shape("adam_step", w.shape(), g)?;
    let dir = state.advance(g, cfg)?;
    let w_next = apply_update(w, &dir, lr_t, cfg.weight_decay)?;
    Ok((w_next, dir))
}

pub(crate) fn check_lr(lr_t: f64) -> Result<()> {
    if lr_t.is_finite() && lr_t >= 0.0 {
        Ok(())
    } else {
        Err(FoamError::Domain(format!("step size must be finite and non-negative, got {lr_t}")))
    }
}

pub(crate) fn check_shape(op: &'static str, expected: (usize, usize), g: &Matrix) -> Result<()> {
    if g.shape() != expected {
        return Err(FoamError::Shape {
            op,
            expected,
            actual: g.shape(),
        });
    }
    Ok(())
}

pub(crate) fn ema(prev: &Matrix, beta: f64, x: &Matrix) -> Result<Matrix> {
    prev.scale_add(beta, x, 1.0 - beta)
}

pub(crate) fn square(g: &Matrix) -> Matrix {
    g.map(|v| v * v)
}

/// Elementwise `m / denom(v)`.
pub(crate) fn direction(m: &Matrix, v: &Matrix, cfg: &OptimizerConfig) -> Result<Matrix> {
    let data = m
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(&mi, &vi)| mi / cfg.denom(vi))
        .collect();
    Matrix::from_parts_checked(m.rows(), m.cols(), data, "update direction")
}

/// `w (1 - lr wd) - lr dir`; the decay factor is skipped entirely when
/// `wd == 0` so the plain update is a single fused expression.
pub(crate) fn apply_update(w: &Matrix, dir: &Matrix, lr: f64, wd: f64) -> Result<Matrix> {
    let decay = 1.0 - lr * wd;
    let data = w
        .as_slice()
        .iter()
        .zip(dir.as_slice())
        .map(|(&wi, &di)| {
            if wd == 0.0 {
                wi - lr * di
            } else {
                wi * decay - lr * di
            }
        })
        .collect();
    Matrix::from_parts_checked(w.rows(), w.cols(), data, "updated weights")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::DenomConvention;

    fn cfg() -> OptimizerConfig {
        OptimizerConfig {
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            ..Default::default()
        }
    }

    #[test]
    fn single_step_hand_value() {
        let cfg = cfg();
        let w = Matrix::zeros(1, 1);
        let g = Matrix::filled(1, 1, 1.0);
        let mut st = AdamState::new(1, 1, &cfg).unwrap();
        let w1 = adam_step(&w, &g, &mut st, &cfg, 0.01).unwrap();
        assert!((st.first_moment().get(0, 0) - 0.1).abs() < 1e-15);
        assert!((st.second_moment().get(0, 0) - 0.05).abs() < 1e-15);
        // -0.01 * 0.1 / (sqrt(0.05) + 1e-8)
        assert!((w1.get(0, 0) + 0.0044721).abs() < 1e-7);
        assert_eq!(st.step(), 1);
    }

    #[test]
    fn zero_gradient_keeps_weights() {
        let cfg = cfg();
        let w = Matrix::from_rows(&[&[0.3, -0.7]]).unwrap();
        let mut st = AdamState::new(1, 2, &cfg).unwrap();
        let w1 = adam_step(&w, &Matrix::zeros(1, 2), &mut st, &cfg, 0.1).unwrap();
        assert_eq!(w1, w);
    }

    #[test]
    fn zero_decay_is_sign_like() {
        let cfg = OptimizerConfig { beta1: 0.0, beta2: 0.0, ..cfg() };
        let g = Matrix::from_rows(&[&[2.0, -0.5, 1e-3]]).unwrap();
        let mut st = AdamState::new(1, 3, &cfg).unwrap();
        let w1 = adam_step(&Matrix::zeros(1, 3), &g, &mut st, &cfg, 0.01).unwrap();
        for (wi, gi) in w1.as_slice().iter().zip(g.as_slice()) {
            assert!((wi + 0.01 * gi / (gi.abs() + 1e-8)).abs() < 1e-15);
            assert!((wi.abs() - 0.01).abs() < 1e-7);
        }
    }

    #[test]
    fn eps_inside_sqrt_convention() {
        let cfg = OptimizerConfig { denom_convention: DenomConvention::EpsInsideSqrt, ..cfg() };
        let mut st = AdamState::new(1, 1, &cfg).unwrap();
        let w1 = adam_step(&Matrix::zeros(1, 1), &Matrix::filled(1, 1, 1.0), &mut st, &cfg, 0.01).unwrap();
        assert!((w1.get(0, 0) + 0.01 * 0.1 / (0.05f64 + 1e-8).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn decoupled_weight_decay() {
        let cfg = OptimizerConfig { weight_decay: 0.1, ..cfg() };
        let w = Matrix::from_rows(&[&[2.0]]).unwrap();
        let mut st = AdamState::new(1, 1, &cfg).unwrap();
        let w1 = adam_step(&w, &Matrix::zeros(1, 1), &mut st, &cfg, 0.5).unwrap();
        assert!((w1.get(0, 0) - 2.0 * (1.0 - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let cfg = cfg();
        let mut st = AdamState::new(2, 2, &cfg).unwrap();
        let w = Matrix::zeros(2, 2);
        assert!(adam_step(&w, &Matrix::zeros(2, 3), &mut st, &cfg, 0.1).is_err());
        assert!(adam_step(&w, &Matrix::zeros(2, 2), &mut st, &cfg, -1.0).is_err());
        assert!(adam_step(&w, &Matrix::zeros(2, 2), &mut st, &cfg, f64::NAN).is_err());
    }
}
