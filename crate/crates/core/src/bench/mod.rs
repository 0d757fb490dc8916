//! Configured benchmark runs: JSON run configs, a deterministic runner that
//! writes JSONL traces and summaries, and paired comparisons.

mod compare;
mod config;
mod runner;

pub use compare::{compare, late_phase_loss, pair, CompareReport, Paired, PairedPoint, LATE_PHASE_FRACTION};
pub use config::{OptimizerKind, OptimizerSpec, RunConfig, CONFIG_SCHEMA};
pub use runner::{run, RunOutput, RunSummary, SUMMARY_FILE, TRACE_FILE};
