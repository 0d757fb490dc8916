//! JSON snapshots of optimizer state, sufficient to resume a run bit-exactly.
//!
//! Floats are written with shortest round-trip formatting and parsed back
//! exactly, so a restored optimizer continues on the identical trajectory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FoamError, Result};

use super::routing::{Optimizer, ParamGroup, ParamState};
use super::OptimizerConfig;

pub const SNAPSHOT_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSnapshot {
    pub name: String,
    pub group: ParamGroup,
    pub shape: (usize, usize),
    pub level: Option<u32>,
    pub step: u64,
    pub state: ParamState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSnapshot {
    pub schema: u32,
    pub config: OptimizerConfig,
    pub params: Vec<ParamSnapshot>,
}

impl OptimizerSnapshot {
    pub fn capture(opt: &Optimizer) -> Self {
        let params = opt
            .groups()
            .iter()
            .zip(opt.states())
            .map(|(g, s)| ParamSnapshot {
                name: g.name.clone(),
                group: g.clone(),
                shape: s.param_shape(),
                level: s.level(),
                step: s.step(),
                state: s.clone(),
            })
            .collect();
        OptimizerSnapshot {
            schema: SNAPSHOT_SCHEMA,
            config: opt.config().clone(),
            params,
        }
    }

    /// Rebuilds the optimizer, checking that the redundant header fields
    /// agree with the embedded states. Shadow Adam is not part of the
    /// snapshot.
    pub fn restore(self) -> Result<Optimizer> {
        if self.schema != SNAPSHOT_SCHEMA {
            return Err(FoamError::State(format!("unsupported snapshot schema {}", self.schema)));
        }
        let mut groups = Vec::with_capacity(self.params.len());
        let mut states = Vec::with_capacity(self.params.len());
        for p in self.params {
            if p.state.param_shape() != p.shape || p.state.level() != p.level || p.state.step() != p.step || p.group.name != p.name {
                return Err(FoamError::State(format!("inconsistent snapshot entry `{}`", p.name)));
            }
            groups.push(p.group);
            states.push(p.state);
        }
        Optimizer::from_states(self.config, groups, states)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
