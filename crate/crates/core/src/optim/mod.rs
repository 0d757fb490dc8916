//! Optimizers: reference Adam, FOAM, FOAM-Mini and an Adam-Mini baseline,
//! plus step-size schedules, per-parameter routing and state snapshots.
//!
//! None of the optimizers apply bias correction.

mod adam;
mod adam_mini;
mod config;
mod foam;
mod moment;
mod routing;
mod schedule;
mod snapshot;

pub use adam::{adam_step, adam_step_with_direction, AdamState};
pub use adam_mini::{adam_mini_step, AdamMiniState};
pub use config::{DenomConvention, OptimizerConfig};
pub use foam::{foam_mini_level, foam_step, foam_step_detailed, FoamMoments, FoamState, FoamUpdate};
pub use moment::Moment;
pub use routing::{
    route_and_step, step_param, Optimizer, ParamGroup, ParamKind, ParamSpec, ParamState, ParamUpdate, StepReport,
};
pub use schedule::{lr_inv_sqrt, lr_warmup_cosine, Schedule};
pub use snapshot::{OptimizerSnapshot, ParamSnapshot, SNAPSHOT_SCHEMA};
