//! Replay trace: a versioned header plus one structured record per step,
//! stored as line-delimited JSON. Re-simulating the recorded actions through
//! a fresh engine reproduces every world-derived field.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::Envelope;
use crate::config::SimConfig;
use crate::geom::Vec2;
use crate::sim::{
    ActionRecord, BlockId, BlockType, ClearEventRecord, RawPerceptSet, TaskSpec, WorldState,
};

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("malformed trace: {0}")]
    Malformed(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u32,
    pub config: SimConfig,
    /// World as generated at step 0; replays start from here.
    pub world: WorldState,
}

/// Agent-side state after ingesting this step's percepts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub entity: usize,
    pub virtual_pos: Vec2,
    pub attachments: Vec<(Vec2, BlockType)>,
    pub identified: Vec<String>,
}

/// Engine-side entity state after this step resolved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub team: String,
    pub pos: Vec2,
    pub energy: u32,
    pub disabled: bool,
    pub attached_blocks: Vec<BlockId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentificationRecord {
    pub a: String,
    pub b: String,
    /// Maps b-frame points into a's frame.
    pub translation: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TaskEvent {
    Created {
        task: TaskSpec,
    },
    Assigned {
        task: String,
        team: String,
        agents: Vec<String>,
    },
    Cancelled {
        task: String,
        team: String,
        agents: Vec<String>,
    },
    Submitted {
        task: String,
        team: String,
        by: String,
        reward: u64,
        consumed: Vec<BlockId>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    /// Percepts handed to each agent at the start of the step.
    pub percepts: BTreeMap<String, RawPerceptSet>,
    /// Agent containers after ingestion and coordination.
    pub agents: BTreeMap<String, AgentRecord>,
    pub identifications: Vec<IdentificationRecord>,
    /// Messages sent this step (delivered next step).
    pub messages: Vec<Envelope>,
    pub task_events: Vec<TaskEvent>,
    /// Resolved action of every agent.
    pub actions: BTreeMap<String, ActionRecord>,
    /// Clear events that fired after actions.
    pub events: Vec<ClearEventRecord>,
    /// Engine entity state after the step.
    pub entities: BTreeMap<String, EntityRecord>,
    pub scores: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayTrace {
    pub header: TraceHeader,
    pub records: Vec<StepRecord>,
}

impl ReplayTrace {
    pub fn new(config: SimConfig, world: &WorldState) -> Self {
        ReplayTrace {
            header: TraceHeader {
                version: TRACE_VERSION,
                config,
                world: world.clone(),
            },
            records: Vec::new(),
        }
    }

    /// One JSON line for the header, one per step record.
    pub fn to_ndjson(&self) -> Result<String, TraceError> {
        let mut out = serde_json::to_string(&self.header)?;
        out.push('\n');
        for record in &self.records {
            out.push_str(&serde_json::to_string(record)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_ndjson(text: &str) -> Result<Self, TraceError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header_line = lines
            .next()
            .ok_or_else(|| TraceError::Malformed("empty trace".into()))?;
        let header: TraceHeader = serde_json::from_str(header_line)?;
        if header.version != TRACE_VERSION {
            return Err(TraceError::Malformed(format!(
                "unsupported trace version {}",
                header.version
            )));
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let record: StepRecord = serde_json::from_str(line)
                .map_err(|e| TraceError::Malformed(format!("record {i}: {e}")))?;
            records.push(record);
        }
        for (i, r) in records.iter().enumerate() {
            if r.step != i as u64 {
                return Err(TraceError::Malformed(format!(
                    "record {} carries step {}",
                    i, r.step
                )));
            }
        }
        Ok(ReplayTrace { header, records })
    }

    /// Actions of one step as the engine expects them, indexed by entity id.
    pub fn actions_for_engine(
        &self,
        record: &StepRecord,
    ) -> Result<Vec<crate::sim::ActionRequest>, TraceError> {
        let n = self.header.config.total_entities();
        let mut actions = vec![crate::sim::ActionRequest::Skip; n];
        for (name, rec) in &record.actions {
            let id = crate::config::entity_of_name(&self.header.config, name)
                .ok_or_else(|| TraceError::Malformed(format!("unknown agent {name}")))?;
            actions[id] = rec.request.clone();
        }
        Ok(actions)
    }
}
