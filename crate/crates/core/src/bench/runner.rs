use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{residual_ratios, StepRecord, TRACE_SCHEMA};
use crate::error::{FoamError, Result};
use crate::fold::FoldSpec;
use crate::matrix::Matrix;
use crate::optim::{Optimizer, ParamSpec};
use crate::tasks::{make_task, TaskState};

use super::config::RunConfig;

pub const TRACE_FILE: &str = "trace.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: u32,
    /// Noise-free loss over the full dataset after the last step.
    pub final_loss: f64,
    /// Smallest total gradient norm seen before any update.
    pub min_grad_norm: f64,
    pub mean_delta_energy_ratio: Option<f64>,
    /// Largest residual norm ratio observed over the run.
    pub max_delta_norm_ratio: Option<f64>,
    pub mean_cos_to_adam: Option<f64>,
    pub steps: u64,
    pub config_hash: String,
}

/// Everything a run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    /// Recorded steps only.
    pub records: Vec<StepRecord>,
    /// Mini-batch loss at every step.
    pub losses: Vec<f64>,
    pub summary: RunSummary,
    pub final_params: Vec<Matrix>,
}

impl RunOutput {
    /// Trace in JSONL form, one record per line.
    pub fn trace_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_json_line()?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Writes `trace.jsonl` and `summary.json` into `dir`, creating it.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut trace = BufWriter::new(fs::File::create(dir.join(TRACE_FILE))?);
        for r in &self.records {
            writeln!(trace, "{}", r.to_json_line()?)?;
        }
        trace.flush()?;
        let mut summary = serde_json::to_string_pretty(&self.summary)?;
        summary.push('\n');
        fs::write(dir.join(SUMMARY_FILE), summary)?;
        Ok(())
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Mean residual ratios over matrix parameters with non-zero gradients.
fn step_residual_ratios(specs: &[ParamSpec], task: &TaskState, grads: &[Matrix]) -> Result<Option<(f64, f64)>> {
    let mut norm = Vec::new();
    let mut energy = Vec::new();
    for ((spec, p), g) in specs.iter().zip(task.params()).zip(grads) {
        if !p.is_matrix {
            continue;
        }
        let fold = FoldSpec::new(spec.level, g.cols())?;
        match residual_ratios(g, &fold) {
            Ok((n, e)) => {
                debug_assert!(n <= 1.0 + 1e-12, "residual norm ratio {n} exceeds 1");
                norm.push(n);
                energy.push(e);
            }
            Err(FoamError::Domain(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if norm.is_empty() {
        return Ok(None);
    }
    // Averaging squares breaks `energy == norm²`, so the record keeps the
    // mean norm ratio and its square; per-parameter energies feed the summary.
    let n = mean(&norm).unwrap();
    Ok(Some((n, mean(&energy).unwrap())))
}

fn diverged(step: u64, what: impl Into<String>) -> FoamError {
    FoamError::Diverged {
        step,
        what: what.into(),
    }
}

/// Executes `config` deterministically.
///
/// Returns [`FoamError::Diverged`] with the failing step if the loss or any
/// weight becomes non-finite.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut task = make_task(&config.task)?;
    let specs: Vec<ParamSpec> = task.params().iter().map(|p| config.optimizer.param_spec(p)).collect();
    let mut optimizer = Optimizer::new(config.optimizer.config.clone(), &specs)?;
    if config.shadow_adam {
        optimizer = optimizer.with_shadow_adam()?;
    }
    let mut weights = task.param_values();

    let mut records = Vec::new();
    let mut losses = Vec::with_capacity(config.steps as usize);
    let mut min_grad_norm = f64::INFINITY;
    let mut energies = Vec::new();
    let mut max_norm_ratio: Option<f64> = None;
    let mut cosines = Vec::new();

    for t in 1..=config.steps {
        let lr_t = config.schedule.lr_at(t, config.steps, config.optimizer.config.lr)?;
        let batch = task.sample_batch();
        let (loss, grads) = task.loss_and_grad(&batch)?;
        if !loss.is_finite() {
            return Err(diverged(t, format!("loss is {loss}")));
        }
        let grad_norm = grads.iter().map(Matrix::squared_norm).sum::<f64>().sqrt();
        if !grad_norm.is_finite() {
            return Err(diverged(t, "gradient is not finite"));
        }
        min_grad_norm = min_grad_norm.min(grad_norm);

        let ratios = step_residual_ratios(&specs, &task, &grads)?;
        if let Some((n, e)) = ratios {
            energies.push(e);
            max_norm_ratio = Some(max_norm_ratio.map_or(n, |m| m.max(n)));
        }

        let report = optimizer.step(&mut weights, &grads, lr_t).map_err(|e| match e {
            FoamError::NonFinite(what) => diverged(t, what),
            other => other,
        })?;
        if let Some(c) = report.cos_to_adam {
            cosines.push(c);
        }
        task.set_param_values(weights.clone())?;
        losses.push(loss);

        if t == 1 || t % config.record_every == 0 || t == config.steps {
            let record = StepRecord {
                schema: TRACE_SCHEMA,
                step: t,
                loss,
                grad_norm,
                delta_norm_ratio: ratios.map(|r| r.0),
                delta_energy_ratio: ratios.map(|r| r.0 * r.0),
                cos_to_adam: report.cos_to_adam,
                lr_t,
            };
            debug_assert!(record.validate().is_ok(), "{record:?}");
            records.push(record);
        }
    }

    let final_loss = task.full_loss()?;
    if !final_loss.is_finite() {
        return Err(diverged(config.steps, format!("final loss is {final_loss}")));
    }
    let summary = RunSummary {
        schema: TRACE_SCHEMA,
        final_loss,
        min_grad_norm,
        mean_delta_energy_ratio: mean(&energies),
        max_delta_norm_ratio: max_norm_ratio,
        mean_cos_to_adam: mean(&cosines),
        steps: config.steps,
        config_hash: config.config_hash(),
    };
    Ok(RunOutput {
        records,
        losses,
        summary,
        final_params: weights,
    })
}
