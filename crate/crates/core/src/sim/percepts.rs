//! Limited-vision percept computation.
//!
//! Each entity perceives exactly the cells within the Manhattan vision
//! radius, with coordinates relative to itself. Teammates show up with a
//! team label but never an identity, and attachment flags never name an
//! owner — the agent side has to reconstruct both.

use serde::{Deserialize, Serialize};

use crate::config::team_name;
use crate::geom::Vec2;

use super::world::area_cells;
use super::{ActionRequest, ActionResult, BlockType, TaskSpec, Terrain, WorldState};

/// What occupies a perceived cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ThingKind {
    Entity { team: String },
    Block { block_type: BlockType },
    Dispenser { block_type: BlockType },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThingPercept {
    pub rel: Vec2,
    #[serde(flatten)]
    pub kind: ThingKind,
}

/// Task as perceived by an agent.
pub type TaskView = TaskSpec;

/// Raw percepts of one entity for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPerceptSet {
    pub step: u64,
    /// Own team's score.
    pub score: u64,
    pub energy: u32,
    pub disabled: bool,
    pub last_action: Option<ActionRequest>,
    pub last_action_result: Option<ActionResult>,
    /// Every cell of the vision diamond, in (y, x) order of the offsets.
    /// Out-of-bounds cells read as obstacle.
    pub terrain: Vec<(Vec2, Terrain)>,
    /// Things on perceived cells, self included at (0, 0).
    pub things: Vec<ThingPercept>,
    /// Offsets holding a block currently carried by some entity (no owner).
    pub attached: Vec<Vec2>,
    /// All unexpired tasks.
    pub tasks: Vec<TaskView>,
}

impl RawPerceptSet {
    pub fn terrain_at(&self, rel: Vec2) -> Option<Terrain> {
        self.terrain
            .iter()
            .find(|(r, _)| *r == rel)
            .map(|(_, t)| *t)
    }

    pub fn things_at(&self, rel: Vec2) -> impl Iterator<Item = &ThingPercept> {
        self.things.iter().filter(move |t| t.rel == rel)
    }

    pub fn is_attached(&self, rel: Vec2) -> bool {
        self.attached.contains(&rel)
    }
}

/// Compute the percepts of `entity` for the current step.
pub fn compute_percepts(world: &WorldState, entity: usize) -> RawPerceptSet {
    let e = &world.entities[entity];
    let radius = world.config().vision_radius;
    let origin = e.pos;

    let mut terrain = Vec::new();
    let mut things = Vec::new();
    let mut attached = Vec::new();
    for cell in area_cells(origin, radius) {
        let rel = cell - origin;
        terrain.push((rel, world.terrain_at(cell)));
        // Entities report everyone but themselves, team label only.
        if let Some(other) = world.entity_at(cell) {
            if other.id != entity {
                things.push(ThingPercept {
                    rel,
                    kind: ThingKind::Entity {
                        team: team_name(other.team),
                    },
                });
            }
        }
        if let Some((id, block)) = world.block_at(cell) {
            things.push(ThingPercept {
                rel,
                kind: ThingKind::Block {
                    block_type: block.block_type.clone(),
                },
            });
            if world.block_is_held(*id) {
                attached.push(rel);
            }
        }
        if let Some(ty) = world.dispenser_at(cell) {
            things.push(ThingPercept {
                rel,
                kind: ThingKind::Dispenser {
                    block_type: ty.clone(),
                },
            });
        }
    }

    let (last_action, last_action_result) = match world.last_action(entity) {
        Some((req, res)) => (Some(req.clone()), Some(*res)),
        None => (None, None),
    };

    RawPerceptSet {
        step: world.step,
        score: world.scores[e.team as usize],
        energy: e.energy,
        disabled: e.is_disabled(world.step),
        last_action,
        last_action_result,
        terrain,
        things,
        attached,
        tasks: world
            .tasks
            .iter()
            .filter(|t| !t.expired(world.step))
            .cloned()
            .collect(),
    }
}
