use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{FoamError, Result};
use crate::optim::{foam_mini_level, OptimizerConfig, ParamGroup, ParamSpec, Schedule};
use crate::tasks::TaskParam;
use crate::tasks::TaskSpec;

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Adam on every parameter.
    Adam,
    /// FOAM on weight matrices at `config.level`, Adam on vectors.
    Foam,
    /// FOAM on weight matrices at `floor(log2(cols))`, Adam on vectors.
    FoamMini,
    /// Adam-Mini on weight matrices, Adam on vectors.
    AdamMini,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    #[serde(default)]
    pub config: OptimizerConfig,
}

impl OptimizerSpec {
    /// Routing of a task parameter under this optimizer.
    pub fn param_spec(&self, p: &TaskParam) -> ParamSpec {
        let shape = p.value.shape();
        let (group, level) = match (self.kind, p.is_matrix) {
            (OptimizerKind::Adam, _) | (_, false) => (ParamGroup::adam(&p.name), self.config.level),
            (OptimizerKind::Foam, true) => (ParamGroup::foam(&p.name), self.config.level),
            (OptimizerKind::FoamMini, true) => (ParamGroup::foam(&p.name), foam_mini_level(shape.1)),
            (OptimizerKind::AdamMini, true) => (ParamGroup::adam_mini(&p.name), self.config.level),
        };
        ParamSpec { group, shape, level }
    }
}

fn default_schema() -> u32 {
    CONFIG_SCHEMA
}

fn default_record_every() -> u64 {
    1
}

/// A complete, self-describing benchmark run.
///
/// ```
/// use foam::bench::RunConfig;
///
/// let cfg = RunConfig::from_json(r#"{
///     "seed": 1,
///     "task": {"kind": "quadratic", "dims": [4, 8], "dataset_size": 1, "batch_size": 1},
///     "optimizer": {"kind": "foam", "config": {"level": 2, "alpha": 1.0}},
///     "schedule": {"kind": "inv_sqrt", "eta0": 0.1},
///     "steps": 100
/// }"#).unwrap();
/// assert_eq!(cfg.task.seed, 1);
/// assert_eq!(cfg.record_every, 1);
/// assert!(RunConfig::from_json(r#"{"seed": 1, "typo": 2}"#).is_err());
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub seed: u64,
    pub task: TaskSpec,
    pub optimizer: OptimizerSpec,
    pub schedule: Schedule,
    pub steps: u64,
    #[serde(default)]
    pub shadow_adam: bool,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    /// Directory for `trace.jsonl` and `summary.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl RunConfig {
    /// Parses and validates a config. The task inherits the run seed.
    pub fn from_json(json: &str) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(json)?;
        cfg.task.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.task.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(FoamError::config(
                "schema",
                format!("unsupported schema {}, expected {CONFIG_SCHEMA}", self.schema),
            ));
        }
        if self.task.seed != self.seed {
            return Err(FoamError::config("task.seed", "must equal the run seed"));
        }
        self.task.validate()?;
        self.optimizer
            .config
            .validate()
            .map_err(|e| prefix_field(e, "optimizer.config."))?;
        self.schedule.validate()?;
        if self.steps == 0 {
            return Err(FoamError::config("steps", "must be at least 1"));
        }
        if self.record_every == 0 || self.record_every > self.steps {
            return Err(FoamError::config(
                "record_every",
                format!("must lie in 1..={}, got {}", self.steps, self.record_every),
            ));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring `output_path`.
    pub fn config_hash(&self) -> String {
        let canonical = RunConfig {
            output_path: None,
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn prefix_field(e: FoamError, prefix: &str) -> FoamError {
    match e {
        FoamError::Config { field, message } => FoamError::Config {
            field: format!("{prefix}{field}"),
            message,
        },
        other => other,
    }
}
