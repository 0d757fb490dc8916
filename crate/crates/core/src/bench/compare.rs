use serde::{Deserialize, Serialize};

use crate::error::{FoamError, Result};

use super::config::RunConfig;
use super::runner::{run, RunOutput};

/// Fraction of the run averaged for the late-phase loss.
pub const LATE_PHASE_FRACTION: f64 = 0.1;

/// Loss of both runs at a step recorded by both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedPoint {
    pub step: u64,
    pub loss_a: f64,
    pub loss_b: f64,
}

/// A metric for both runs and `b - a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Paired<T> {
    pub a: T,
    pub b: T,
    pub delta: T,
}

impl Paired<f64> {
    fn new(a: f64, b: f64) -> Self {
        Paired { a, b, delta: b - a }
    }
}

impl Paired<Option<f64>> {
    fn new_opt(a: Option<f64>, b: Option<f64>) -> Self {
        let delta = match (a, b) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        };
        Paired { a, b, delta }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub config_hash_a: String,
    pub config_hash_b: String,
    pub curve: Vec<PairedPoint>,
    pub final_loss: Paired<f64>,
    /// Mean mini-batch loss over the last tenth of each run.
    pub late_phase_loss: Paired<f64>,
    pub min_grad_norm: Paired<f64>,
    pub mean_cos_to_adam: Paired<Option<f64>>,
    pub mean_delta_energy_ratio: Paired<Option<f64>>,
    pub max_delta_norm_ratio: Paired<Option<f64>>,
}

/// Mean of the last `ceil(LATE_PHASE_FRACTION * len)` losses.
pub fn late_phase_loss(losses: &[f64]) -> f64 {
    if losses.is_empty() {
        return f64::NAN;
    }
    let k = ((losses.len() as f64 * LATE_PHASE_FRACTION).ceil() as usize).clamp(1, losses.len());
    let tail = &losses[losses.len() - k..];
    tail.iter().sum::<f64>() / k as f64
}

/// Pairs two finished runs.
pub fn pair(a: &RunOutput, b: &RunOutput) -> CompareReport {
    let curve = a
        .records
        .iter()
        .filter_map(|ra| {
            b.records
                .iter()
                .find(|rb| rb.step == ra.step)
                .map(|rb| PairedPoint {
                    step: ra.step,
                    loss_a: ra.loss,
                    loss_b: rb.loss,
                })
        })
        .collect();
    let (sa, sb) = (&a.summary, &b.summary);
    CompareReport {
        config_hash_a: sa.config_hash.clone(),
        config_hash_b: sb.config_hash.clone(),
        curve,
        final_loss: Paired::new(sa.final_loss, sb.final_loss),
        late_phase_loss: Paired::new(late_phase_loss(&a.losses), late_phase_loss(&b.losses)),
        min_grad_norm: Paired::new(sa.min_grad_norm, sb.min_grad_norm),
        mean_cos_to_adam: Paired::new_opt(sa.mean_cos_to_adam, sb.mean_cos_to_adam),
        mean_delta_energy_ratio: Paired::new_opt(sa.mean_delta_energy_ratio, sb.mean_delta_energy_ratio),
        max_delta_norm_ratio: Paired::new_opt(sa.max_delta_norm_ratio, sb.max_delta_norm_ratio),
    }
}

/// Runs both configs and pairs them. They must share the task and seed.
pub fn compare(a: &RunConfig, b: &RunConfig) -> Result<CompareReport> {
    if a.seed != b.seed {
        return Err(FoamError::config("seed", format!("configs differ in seed ({} vs {})", a.seed, b.seed)));
    }
    if a.task != b.task {
        return Err(FoamError::config("task", "configs describe different tasks"));
    }
    Ok(pair(&run(a)?, &run(b)?))
}
