//! Per-parameter routing.
//!
//! 2-D weight matrices go to FOAM and everything else (biases, norms) to
//! Adam. FOAM-routed parameters step with `lr_t * alpha`, the rest with
//! `lr_t`.

use serde::{Deserialize, Serialize};

use crate::error::{FoamError, Result};
use crate::fold::FoldSpec;
use crate::matrix::Matrix;

use super::adam::{apply_update, check_lr, AdamState};
use super::adam_mini::AdamMiniState;
use super::foam::{foam_step_scaled, FoamState};
use super::OptimizerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Foam,
    Adam,
    AdamMini,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub kind: ParamKind,
    /// Multiply this parameter's step size by `alpha`.
    pub applies_alpha: bool,
}

impl ParamGroup {
    pub fn foam(name: impl Into<String>) -> Self {
        ParamGroup {
            name: name.into(),
            kind: ParamKind::Foam,
            applies_alpha: true,
        }
    }

    pub fn adam(name: impl Into<String>) -> Self {
        ParamGroup {
            name: name.into(),
            kind: ParamKind::Adam,
            applies_alpha: false,
        }
    }

    pub fn adam_mini(name: impl Into<String>) -> Self {
        ParamGroup {
            name: name.into(),
            kind: ParamKind::AdamMini,
            applies_alpha: false,
        }
    }
}

/// Optimizer state of a single parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamState {
    Foam(FoamState),
    Adam(AdamState),
    AdamMini(AdamMiniState),
}

impl ParamState {
    /// Fresh state for `group` on a parameter of shape `shape`. `level` is
    /// used only by FOAM-kind parameters.
    pub fn new(group: &ParamGroup, shape: (usize, usize), level: u32, cfg: &OptimizerConfig) -> Result<Self> {
        let (rows, cols) = shape;
        Ok(match group.kind {
            ParamKind::Foam => ParamState::Foam(FoamState::new(rows, FoldSpec::new(level, cols)?, cfg)?),
            ParamKind::Adam => ParamState::Adam(AdamState::new(rows, cols, cfg)?),
            ParamKind::AdamMini => ParamState::AdamMini(AdamMiniState::new(rows, cols, cfg)?),
        })
    }

    pub fn kind(&self) -> ParamKind {
        match self {
            ParamState::Foam(_) => ParamKind::Foam,
            ParamState::Adam(_) => ParamKind::Adam,
            ParamState::AdamMini(_) => ParamKind::AdamMini,
        }
    }

    pub fn step(&self) -> u64 {
        match self {
            ParamState::Foam(s) => s.step(),
            ParamState::Adam(s) => s.step(),
            ParamState::AdamMini(s) => s.step(),
        }
    }

    pub fn param_shape(&self) -> (usize, usize) {
        match self {
            ParamState::Foam(s) => s.param_shape(),
            ParamState::Adam(s) => s.shape(),
            ParamState::AdamMini(s) => s.shape(),
        }
    }

    /// Fold level for FOAM states, `None` otherwise.
    pub fn level(&self) -> Option<u32> {
        match self {
            ParamState::Foam(s) => Some(s.spec().level()),
            _ => None,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            ParamState::Foam(s) => s.validate(),
            ParamState::Adam(s) => {
                if s.v.shape() != s.m.shape() {
                    return Err(FoamError::State("Adam moments differ in shape".into()));
                }
                s.m.validate()?;
                s.v.validate()
            }
            ParamState::AdamMini(s) => s.validate(),
        }
    }
}

/// Outcome of stepping one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamUpdate {
    pub weights: Matrix,
    /// Adaptive direction `M / denom(V)` before step-size scaling.
    pub direction: Matrix,
}

/// Steps one parameter according to its group and state.
pub fn step_param(
    group: &ParamGroup,
    w: &Matrix,
    g: &Matrix,
    state: &mut ParamState,
    cfg: &OptimizerConfig,
    lr_t: f64,
) -> Result<ParamUpdate> {
    check_lr(lr_t)?;
    if state.kind() != group.kind {
        return Err(FoamError::State(format!(
            "parameter `{}` is routed to {:?} but holds {:?} state",
            group.name,
            group.kind,
            state.kind()
        )));
    }
    let lr_eff = if group.applies_alpha { lr_t * cfg.alpha } else { lr_t };
    match state {
        ParamState::Foam(s) => {
            let up = foam_step_scaled(w, g, s, cfg, lr_eff)?;
            Ok(ParamUpdate {
                weights: up.weights,
                direction: up.moments.direction,
            })
        }
        ParamState::Adam(s) => {
            super::adam::check_shape("adam_step", w.shape(), g)?;
            let dir = s.advance(g, cfg)?;
            Ok(ParamUpdate {
                weights: apply_update(w, &dir, lr_eff, cfg.weight_decay)?,
                direction: dir,
            })
        }
        ParamState::AdamMini(s) => {
            super::adam::check_shape("adam_mini_step", w.shape(), g)?;
            let dir = s.advance(g, cfg)?;
            Ok(ParamUpdate {
                weights: apply_update(w, &dir, lr_eff, cfg.weight_decay)?,
                direction: dir,
            })
        }
    }
}

/// Steps every parameter exactly once and returns the new weights in order.
pub fn route_and_step(
    params: &[(&ParamGroup, &Matrix, &Matrix)],
    states: &mut [ParamState],
    cfg: &OptimizerConfig,
    lr_t: f64,
) -> Result<Vec<Matrix>> {
    if params.len() != states.len() {
        return Err(FoamError::State(format!(
            "{} parameters but {} optimizer states",
            params.len(),
            states.len()
        )));
    }
    params
        .iter()
        .zip(states.iter_mut())
        .map(|(&(group, w, g), state)| step_param(group, w, g, state, cfg, lr_t).map(|u| u.weights))
        .collect()
}

/// Declaration of one trainable parameter for [`Optimizer::new`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub group: ParamGroup,
    pub shape: (usize, usize),
    /// Fold level for FOAM-kind parameters.
    pub level: u32,
}

/// Per-step measurements returned by [`Optimizer::step`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    /// Mean cosine similarity between FOAM directions and the shadow Adam
    /// directions over FOAM-kind parameters, when shadowing is enabled.
    pub cos_to_adam: Option<f64>,
}

/// A set of routed parameter states with optional shadow Adam.
///
/// The shadow keeps a full Adam state for every FOAM-kind parameter and
/// feeds it the same gradients; it never updates weights and only exists to
/// measure how far FOAM's update direction drifts from Adam's.
#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    groups: Vec<ParamGroup>,
    states: Vec<ParamState>,
    shadow: Option<Vec<Option<AdamState>>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, params: &[ParamSpec]) -> Result<Self> {
        config.validate()?;
        let states = params
            .iter()
            .map(|p| ParamState::new(&p.group, p.shape, p.level, &config))
            .collect::<Result<Vec<_>>>()?;
        Ok(Optimizer {
            groups: params.iter().map(|p| p.group.clone()).collect(),
            states,
            config,
            shadow: None,
        })
    }

    /// Rebuilds an optimizer from existing states (e.g. a snapshot).
    pub fn from_states(config: OptimizerConfig, groups: Vec<ParamGroup>, states: Vec<ParamState>) -> Result<Self> {
        config.validate()?;
        if groups.len() != states.len() {
            return Err(FoamError::State("group and state counts differ".into()));
        }
        for (g, s) in groups.iter().zip(&states) {
            if g.kind != s.kind() {
                return Err(FoamError::State(format!("kind mismatch for `{}`", g.name)));
            }
            s.validate()?;
        }
        Ok(Optimizer {
            config,
            groups,
            states,
            shadow: None,
        })
    }

    /// Enables the shadow Adam diagnostic. Must be called before the first
    /// step to compare like with like.
    pub fn with_shadow_adam(mut self) -> Result<Self> {
        let dense = OptimizerConfig {
            quant8: false,
            ..self.config.clone()
        };
        let shadow = self
            .states
            .iter()
            .map(|s| match s {
                ParamState::Foam(f) => {
                    let (r, c) = f.param_shape();
                    AdamState::new(r, c, &dense).map(Some)
                }
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        self.shadow = Some(shadow);
        Ok(self)
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn states(&self) -> &[ParamState] {
        &self.states
    }

    pub fn has_shadow(&self) -> bool {
        self.shadow.is_some()
    }

    /// Steps all parameters in place.
    pub fn step(&mut self, weights: &mut [Matrix], grads: &[Matrix], lr_t: f64) -> Result<StepReport> {
        if weights.len() != self.states.len() || grads.len() != self.states.len() {
            return Err(FoamError::State(format!(
                "expected {} parameters, got {} weights and {} gradients",
                self.states.len(),
                weights.len(),
                grads.len()
            )));
        }
        let dense = OptimizerConfig {
            quant8: false,
            ..self.config.clone()
        };
        let mut cosines = Vec::new();
        for i in 0..self.states.len() {
            let up = step_param(&self.groups[i], &weights[i], &grads[i], &mut self.states[i], &self.config, lr_t)?;
            if let Some(Some(shadow)) = self.shadow.as_mut().map(|s| s[i].as_mut()) {
                let reference = shadow.advance(&grads[i], &dense)?;
                if let Ok(c) = up.direction.cosine_similarity(&reference) {
                    cosines.push(c);
                }
            }
            weights[i] = up.weights;
        }
        let cos_to_adam = if cosines.is_empty() {
            None
        } else {
            Some(cosines.iter().sum::<f64>() / cosines.len() as f64)
        };
        Ok(StepReport { cos_to_adam })
    }

    /// Total stored moment entries across all parameters (shadow excluded).
    pub fn state_elements(&self) -> usize {
        self.states
            .iter()
            .map(|s| match s {
                ParamState::Foam(f) => f.state_elements(),
                ParamState::Adam(a) => {
                    let (r, c) = a.shape();
                    2 * r * c
                }
                ParamState::AdamMini(a) => {
                    let (r, c) = a.shape();
                    r * c + 1
                }
            })
            .sum()
    }
}
