//! Match harness: configuration loading, headless execution, replay traces,
//! metrics, rendering and validation.

mod metrics;
mod rebuild;
mod render;
mod run;
mod trace;
mod validate;

pub use metrics::{compute_metrics, format_table, FailureCause, MetricsError, MetricsReport, TeamMetrics};
pub use rebuild::{rebuild_agent_maps, rebuild_pipeline, rebuild_world};
pub use render::{frame_of_map, frame_of_world, render, RenderError, RenderView};
pub use run::{sync_team_maps, MatchRunner, OperatorState, TeamAi, TeamController};
pub use trace::{
    AgentRecord, EntityRecord, IdentificationRecord, ReplayTrace, StepRecord, TaskEvent,
    TraceError, TraceHeader, TRACE_VERSION,
};
pub use validate::{validate, ValidationReport};

use crate::config::SimConfig;
use crate::sim::EngineError;

/// Run a full match from a config, producing the replay trace.
pub fn run(config: &SimConfig) -> Result<ReplayTrace, EngineError> {
    MatchRunner::from_config(config)?.run()
}
