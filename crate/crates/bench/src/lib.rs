//! Throughput experiments over a local server and simulated clients.

pub mod experiment;
pub mod plan;
pub mod report;
pub mod stats;

pub use experiment::{run_plan, Analysis, Outcome, RunRow};
pub use plan::{ExperimentKind, ExperimentPlan, ServerPlan, SinkKind};
pub use stats::{fit_linear, median, rank_sum, FitError, LinearFit, RankSum};
