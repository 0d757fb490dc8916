//! Deterministic desk-scale training problems with exact gradients.
//!
//! * `quadratic`: `f(W) = ½‖W − W*‖²` with optional additive Gaussian
//!   gradient noise. Dims `[rows, cols]`.
//! * `logistic`: binary logistic regression on two overlapping Gaussian
//!   classes with a planted separator. Dims `[features]`.
//! * `mlp`: one tanh hidden layer with softmax cross-entropy on Gaussian-blob
//!   classification data. Dims `[d_in, d_hidden, d_out]`.
//!
//! All randomness comes from one [`SplitMix64`] stream seeded by the task
//! seed: the dataset is drawn first, then the initial parameters, then batch
//! indices (and noise) step by step.

mod logistic;
mod mlp;
mod quadratic;

use serde::{Deserialize, Serialize};

use crate::error::{FoamError, Result};
use crate::matrix::Matrix;
use crate::optim::ParamGroup;
use crate::rng::SplitMix64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Quadratic,
    Logistic,
    Mlp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Task-specific sizes, see the module docs.
    pub dims: Vec<usize>,
    pub dataset_size: usize,
    pub batch_size: usize,
    /// Standard deviation of additive gradient noise (quadratic only).
    #[serde(default)]
    pub noise_std: f64,
    /// Supplied by the run configuration rather than the task block.
    #[serde(skip)]
    pub seed: u64,
}

impl TaskSpec {
    pub fn quadratic(rows: usize, cols: usize, seed: u64) -> Self {
        TaskSpec {
            kind: TaskKind::Quadratic,
            dims: vec![rows, cols],
            dataset_size: 1,
            batch_size: 1,
            noise_std: 0.0,
            seed,
        }
    }

    pub fn logistic(features: usize, dataset_size: usize, batch_size: usize, seed: u64) -> Self {
        TaskSpec {
            kind: TaskKind::Logistic,
            dims: vec![features],
            dataset_size,
            batch_size,
            noise_std: 0.0,
            seed,
        }
    }

    pub fn mlp(d_in: usize, d_hidden: usize, d_out: usize, dataset_size: usize, batch_size: usize, seed: u64) -> Self {
        TaskSpec {
            kind: TaskKind::Mlp,
            dims: vec![d_in, d_hidden, d_out],
            dataset_size,
            batch_size,
            noise_std: 0.0,
            seed,
        }
    }

    pub fn with_noise(mut self, noise_std: f64) -> Self {
        self.noise_std = noise_std;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let expected = match self.kind {
            TaskKind::Quadratic => 2,
            TaskKind::Logistic => 1,
            TaskKind::Mlp => 3,
        };
        if self.dims.len() != expected {
            return Err(FoamError::config(
                "task.dims",
                format!("{:?} expects {expected} dims, got {}", self.kind, self.dims.len()),
            ));
        }
        if self.dims.contains(&0) {
            return Err(FoamError::config("task.dims", "all dims must be at least 1"));
        }
        if self.kind == TaskKind::Mlp && self.dims[2] < 2 {
            return Err(FoamError::config("task.dims", "mlp needs at least 2 output classes"));
        }
        if self.dataset_size == 0 {
            return Err(FoamError::config("task.dataset_size", "must be positive"));
        }
        if self.batch_size == 0 || self.batch_size > self.dataset_size {
            return Err(FoamError::config(
                "task.batch_size",
                format!("must lie in 1..={}, got {}", self.dataset_size, self.batch_size),
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(FoamError::config("task.noise_std", "must be finite and non-negative"));
        }
        if self.noise_std > 0.0 && self.kind != TaskKind::Quadratic {
            return Err(FoamError::config("task.noise_std", "gradient noise is only defined for quadratic"));
        }
        Ok(())
    }
}

/// A named trainable parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskParam {
    pub name: String,
    pub value: Matrix,
    /// Weight matrix (FOAM-eligible) rather than a bias vector.
    pub is_matrix: bool,
}

impl TaskParam {
    fn matrix(name: &str, value: Matrix) -> Self {
        TaskParam {
            name: name.into(),
            value,
            is_matrix: true,
        }
    }

    fn vector(name: &str, value: Matrix) -> Self {
        TaskParam {
            name: name.into(),
            value,
            is_matrix: false,
        }
    }

    /// Default routing: matrices to FOAM, vectors to Adam.
    pub fn default_group(&self) -> ParamGroup {
        if self.is_matrix {
            ParamGroup::foam(&self.name)
        } else {
            ParamGroup::adam(&self.name)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Dataset {
    Quadratic(quadratic::Data),
    Logistic(logistic::Data),
    Mlp(mlp::Data),
}

/// Parameters, data and RNG of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskState {
    spec: TaskSpec,
    params: Vec<TaskParam>,
    data: Dataset,
    rng: SplitMix64,
}

/// Builds the dataset and initial parameters from the spec's seed.
pub fn make_task(spec: &TaskSpec) -> Result<TaskState> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let (data, params) = match spec.kind {
        TaskKind::Quadratic => {
            let (d, p) = quadratic::generate(spec.dims[0], spec.dims[1], &mut rng);
            (Dataset::Quadratic(d), p)
        }
        TaskKind::Logistic => {
            let (d, p) = logistic::generate(spec.dims[0], spec.dataset_size, &mut rng);
            (Dataset::Logistic(d), p)
        }
        TaskKind::Mlp => {
            let (d, p) = mlp::generate(spec.dims[0], spec.dims[1], spec.dims[2], spec.dataset_size, &mut rng);
            (Dataset::Mlp(d), p)
        }
    };
    Ok(TaskState {
        spec: spec.clone(),
        params,
        data,
        rng,
    })
}

impl TaskState {
    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn params(&self) -> &[TaskParam] {
        &self.params
    }

    pub fn param_values(&self) -> Vec<Matrix> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn set_param_values(&mut self, values: Vec<Matrix>) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(FoamError::State("parameter count mismatch".into()));
        }
        for (p, v) in self.params.iter_mut().zip(values) {
            if p.value.shape() != v.shape() {
                return Err(FoamError::Shape {
                    op: "set_param_values",
                    expected: p.value.shape(),
                    actual: v.shape(),
                });
            }
            p.value = v;
        }
        Ok(())
    }

    /// Draws `batch_size` indices uniformly with replacement.
    pub fn sample_batch(&mut self) -> Vec<usize> {
        let n = self.spec.dataset_size;
        (0..self.spec.batch_size).map(|_| self.rng.next_index(n)).collect()
    }

    /// Mini-batch loss and gradients at the current parameters, including
    /// gradient noise for the quadratic task.
    pub fn loss_and_grad(&mut self, batch: &[usize]) -> Result<(f64, Vec<Matrix>)> {
        let values = self.param_values();
        let (loss, mut grads) = self.loss_and_grad_at(&values, batch)?;
        if self.spec.noise_std > 0.0 {
            let sigma = self.spec.noise_std;
            for g in &mut grads {
                let noisy: Vec<f64> = g.as_slice().iter().map(|v| v + sigma * self.rng.next_normal()).collect();
                *g = Matrix::new(g.rows(), g.cols(), noisy)?;
            }
        }
        Ok((loss, grads))
    }

    /// Noise-free loss and exact gradients at arbitrary parameter values.
    pub fn loss_and_grad_at(&self, params: &[Matrix], batch: &[usize]) -> Result<(f64, Vec<Matrix>)> {
        if batch.is_empty() {
            return Err(FoamError::Domain("empty batch".into()));
        }
        if let Some(&bad) = batch.iter().find(|&&i| i >= self.spec.dataset_size) {
            return Err(FoamError::Domain(format!(
                "batch index {bad} out of range for dataset of {}",
                self.spec.dataset_size
            )));
        }
        if params.len() != self.params.len() || params.iter().zip(&self.params).any(|(a, b)| a.shape() != b.value.shape()) {
            return Err(FoamError::State("parameter shapes do not match the task".into()));
        }
        match &self.data {
            Dataset::Quadratic(d) => quadratic::loss_and_grad(d, params),
            Dataset::Logistic(d) => logistic::loss_and_grad(d, params, batch),
            Dataset::Mlp(d) => mlp::loss_and_grad(d, params, batch),
        }
    }

    /// Noise-free loss over the whole dataset at the current parameters.
    pub fn full_loss(&self) -> Result<f64> {
        let all: Vec<usize> = (0..self.spec.dataset_size).collect();
        let values = self.param_values();
        match &self.data {
            Dataset::Quadratic(d) => Ok(quadratic::loss(d, &values)),
            Dataset::Logistic(d) => logistic::loss_and_grad(d, &values, &all).map(|(l, _)| l),
            Dataset::Mlp(d) => mlp::loss_and_grad(d, &values, &all).map(|(l, _)| l),
        }
    }
}
