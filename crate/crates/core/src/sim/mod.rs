//! Authoritative scenario engine.
//!
//! The engine owns the world: terrain, dispensers, blocks, entities, tasks
//! and pending clear events. It advances in lockstep steps — `apply_step`
//! is the only mutator — and hands each entity a limited-vision percept set
//! between steps.

mod generate;
mod percepts;
#[cfg(test)]
mod tests;
mod world;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Direction, Rotation, Vec2};

pub use generate::generate_world;
pub use percepts::{compute_percepts, RawPerceptSet, TaskView, ThingKind, ThingPercept};
pub use world::{StepOutcome, WorldBuilder, WorldState};

/// Terrain of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Terrain {
    Empty,
    Obstacle,
    Goal,
}

/// Block type label, e.g. `b0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockType(pub String);

impl BlockType {
    pub fn new(s: impl Into<String>) -> Self {
        BlockType(s.into())
    }
}

impl fmt::Display for BlockType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BlockType {
    fn from(s: &str) -> Self {
        BlockType(s.to_string())
    }
}

/// Engine-assigned identity of a block, stable from dispense to destruction.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct BlockId(pub u64);

/// One block on the grid. `attached_to` is the direct entity attachment;
/// chains built via connect are tracked as block-block bonds in the world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockState {
    pub pos: Vec2,
    pub block_type: BlockType,
    pub attached_to: Option<usize>,
}

/// Per-entity dynamic state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityState {
    pub id: usize,
    pub team: u32,
    pub pos: Vec2,
    pub energy: u32,
    /// Step until which the entity is disabled (exclusive), if any.
    pub disabled_until: Option<u64>,
    /// Clear action charge: absolute target cell and consecutive count (1-2).
    pub clear_charge: Option<(Vec2, u8)>,
}

impl EntityState {
    pub fn is_disabled(&self, step: u64) -> bool {
        self.disabled_until.is_some_and(|until| step < until)
    }
}

/// One task requirement: a typed block at an offset in the submitter frame.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Requirement {
    pub x: i32,
    pub y: i32,
    pub block_type: BlockType,
}

impl Requirement {
    pub fn new(x: i32, y: i32, block_type: impl Into<BlockType>) -> Self {
        Requirement {
            x,
            y,
            block_type: block_type.into(),
        }
    }

    pub fn offset(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub deadline: u64,
    pub reward: u64,
    pub requirements: Vec<Requirement>,
    pub submitted_by: Option<u32>,
}

impl TaskSpec {
    pub fn expired(&self, step: u64) -> bool {
        self.deadline < step
    }
}

/// A scheduled area clear: everything within the Manhattan radius of the
/// center is destroyed when the trigger step is reached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearEvent {
    pub center: Vec2,
    pub radius: u32,
    pub trigger_step: u64,
}

/// Action an entity submits for one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum ActionRequest {
    Move { direction: Direction },
    Rotate { rotation: Rotation },
    Attach { direction: Direction },
    Detach { direction: Direction },
    /// Connect own block at `offset` (own frame) with the partner entity's
    /// named block; succeeds only when the partner issues the mirror action
    /// this same step.
    Connect { partner: usize, offset: Vec2 },
    Request { direction: Direction },
    Clear { offset: Vec2 },
    Submit { task: String },
    Skip,
}

impl ActionRequest {
    pub fn move_to(direction: Direction) -> Self {
        ActionRequest::Move { direction }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionResult {
    Success,
    FailedBlocked,
    FailedPartner,
    FailedTarget,
    FailedResources,
    FailedDeadline,
    FailedInvalid,
}

impl ActionResult {
    pub fn is_success(self) -> bool {
        self == ActionResult::Success
    }
}

/// Entity touched by a triggered clear, with the facts the metrics need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearVictim {
    pub entity: usize,
    pub team: u32,
    pub on_goal: bool,
    pub had_attachment: bool,
    pub disabled: bool,
}

/// Side effects of a resolved action, recorded for traces and metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionEffect {
    Attached {
        block: BlockId,
    },
    Detached {
        block: BlockId,
    },
    Dispensed {
        block: BlockId,
    },
    Connected {
        partner: usize,
        own_block: BlockId,
        partner_block: BlockId,
    },
    Submitted {
        task: String,
        reward: u64,
        consumed: Vec<BlockId>,
    },
    ClearTriggered {
        target: Vec2,
        destroyed_blocks: Vec<BlockId>,
        victims: Vec<ClearVictim>,
    },
}

/// Request, result and effect of one entity's action in one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub request: ActionRequest,
    pub result: ActionResult,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub effect: Option<ActionEffect>,
}

/// A clear event that fired this step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearEventRecord {
    pub center: Vec2,
    pub radius: u32,
    pub destroyed_blocks: Vec<BlockId>,
    pub disabled_entities: Vec<usize>,
    pub regenerated: Vec<Vec2>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("malformed action set: expected {expected} actions, got {got}")]
    MalformedActions { expected: usize, got: usize },
    #[error("unknown entity {0}")]
    UnknownEntity(usize),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}
