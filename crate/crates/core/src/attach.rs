//! Per-agent attachment model.
//!
//! Attach percepts never say who a block belongs to, so each agent tracks
//! its own attachments from action outcomes and prunes them against the
//! absence of attach flags. Offsets live in the agent frame and rotate with
//! it; refresh only removes, and flags at offsets the model does not claim
//! are never adopted.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Direction, Rotation, Vec2};
use crate::sim::{ActionRequest, ActionResult, BlockType, RawPerceptSet, Terrain, ThingKind};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("inconsistent attachment update at offset {offset}")]
pub struct InconsistentUpdate {
    pub offset: Vec2,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachmentModel {
    #[serde(with = "crate::geom::serde_vec2_map")]
    blocks: BTreeMap<Vec2, BlockType>,
}

impl AttachmentModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn blocks(&self) -> &BTreeMap<Vec2, BlockType> {
        &self.blocks
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn offsets(&self) -> BTreeSet<Vec2> {
        self.blocks.keys().copied().collect()
    }

    pub fn has_type(&self, ty: &BlockType) -> Option<Vec2> {
        self.blocks
            .iter()
            .find(|(_, t)| *t == ty)
            .map(|(o, _)| *o)
    }

    /// Fold in the outcome of the agent's own previous action, reading the
    /// attached block's type off the fresh percepts. Connect is a no-op
    /// here: the slave's block leaves the model through its follow-up
    /// detach, the master's gain goes through [`AttachmentModel::gain`].
    pub fn on_action(
        &mut self,
        action: &ActionRequest,
        result: ActionResult,
        raw: &RawPerceptSet,
    ) -> Result<(), InconsistentUpdate> {
        if !result.is_success() {
            return Ok(());
        }
        match action {
            ActionRequest::Attach { direction } => {
                let offset = direction.delta();
                let seen = raw.things_at(offset).find_map(|t| match &t.kind {
                    ThingKind::Block { block_type } => Some(block_type.clone()),
                    _ => None,
                });
                match seen {
                    // Block already destroyed again (event between steps):
                    // nothing to track, refresh would drop it anyway.
                    None => Ok(()),
                    Some(ty) => self.insert_checked(offset, ty),
                }
            }
            ActionRequest::Detach { direction } => {
                self.blocks.remove(&direction.delta());
                Ok(())
            }
            ActionRequest::Rotate { rotation } => {
                self.blocks = self
                    .blocks
                    .iter()
                    .map(|(o, t)| (rotation.rotate(*o), t.clone()))
                    .collect();
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Record a block gained through a successful connect (the block the
    /// partner delivered), with its offset and type known from coordination.
    pub fn gain(&mut self, offset: Vec2, ty: BlockType) -> Result<(), InconsistentUpdate> {
        self.insert_checked(offset, ty)
    }

    fn insert_checked(&mut self, offset: Vec2, ty: BlockType) -> Result<(), InconsistentUpdate> {
        if self.blocks.contains_key(&offset) {
            return Err(InconsistentUpdate { offset });
        }
        self.blocks.insert(offset, ty);
        Ok(())
    }

    /// Drop every modeled block whose offset lacks an attach flag in the
    /// current percepts; returns what was removed. Catches clear events,
    /// submits and anything else that stole a block behind our back.
    pub fn refresh(&mut self, raw: &RawPerceptSet) -> Vec<(Vec2, BlockType)> {
        let flags: BTreeSet<Vec2> = raw.attached.iter().copied().collect();
        let removed: Vec<(Vec2, BlockType)> = self
            .blocks
            .iter()
            .filter(|(o, _)| !flags.contains(*o))
            .map(|(o, t)| (*o, t.clone()))
            .collect();
        for (o, _) in &removed {
            self.blocks.remove(o);
        }
        removed
    }

    /// Move directions blocked by the surroundings, for the agent cell and
    /// every attachment's swept destination. Mirrors engine traversability:
    /// obstacles, entities and foreign blocks block; dispensers do not.
    pub fn blocked_moves(&self, raw: &RawPerceptSet) -> BTreeSet<Direction> {
        self.blocked_moves_with(raw, &BTreeSet::new())
    }

    /// Like `blocked_moves`, additionally treating `also_own` offsets as the
    /// agent's own cells. Rotation planning passes the physical (pre-turn)
    /// attachment cells here: the percepts still show those blocks, but they
    /// move with the agent and never block it.
    pub fn blocked_moves_with(
        &self,
        raw: &RawPerceptSet,
        also_own: &BTreeSet<Vec2>,
    ) -> BTreeSet<Direction> {
        let mut own = self.own_cells();
        own.extend(also_own.iter().copied());
        Direction::ALL
            .into_iter()
            .filter(|d| {
                let delta = d.delta();
                self.own_cells()
                    .iter()
                    .map(|o| *o + delta)
                    .any(|dest| !own.contains(&dest) && cell_blocked(raw, dest))
            })
            .collect()
    }

    /// Rotations blocked by attachment sweep destinations.
    pub fn blocked_rotations(&self, raw: &RawPerceptSet) -> BTreeSet<Rotation> {
        self.blocked_rotations_with(raw, &BTreeSet::new())
    }

    pub fn blocked_rotations_with(
        &self,
        raw: &RawPerceptSet,
        also_own: &BTreeSet<Vec2>,
    ) -> BTreeSet<Rotation> {
        let mut own = self.own_cells();
        own.extend(also_own.iter().copied());
        [Rotation::Clockwise, Rotation::CounterClockwise]
            .into_iter()
            .filter(|r| {
                self.blocks.keys().any(|o| {
                    let dest = r.rotate(*o);
                    !own.contains(&dest) && cell_blocked(raw, dest)
                })
            })
            .collect()
    }

    fn own_cells(&self) -> BTreeSet<Vec2> {
        let mut own = self.offsets();
        own.insert(Vec2::ZERO);
        own
    }
}

/// Blocked per immediate percepts; cells outside vision cannot block.
fn cell_blocked(raw: &RawPerceptSet, rel: Vec2) -> bool {
    match raw.terrain_at(rel) {
        Some(Terrain::Obstacle) => true,
        Some(_) => raw
            .things_at(rel)
            .any(|t| !matches!(t.kind, ThingKind::Dispenser { .. })),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Terrain, ThingPercept};

    fn raw_with(
        terrain: Vec<(Vec2, Terrain)>,
        things: Vec<ThingPercept>,
        attached: Vec<Vec2>,
    ) -> RawPerceptSet {
        RawPerceptSet {
            step: 1,
            score: 0,
            energy: 100,
            disabled: false,
            last_action: None,
            last_action_result: None,
            terrain,
            things,
            attached,
            tasks: vec![],
        }
    }

    fn open_raw(radius: i32) -> RawPerceptSet {
        let mut terrain = Vec::new();
        for dy in -radius..=radius {
            for dx in -(radius - dy.abs())..=(radius - dy.abs()) {
                terrain.push((Vec2::new(dx, dy), Terrain::Empty));
            }
        }
        raw_with(terrain, vec![], vec![])
    }

    fn block_thing(rel: Vec2, ty: &str) -> ThingPercept {
        ThingPercept {
            rel,
            kind: ThingKind::Block {
                block_type: BlockType::new(ty),
            },
        }
    }

    #[test]
    fn attach_success_adds_block_with_seen_type() {
        let mut model = AttachmentModel::new();
        let mut raw = open_raw(5);
        raw.things.push(block_thing(Vec2::new(0, 1), "b2"));
        raw.attached.push(Vec2::new(0, 1));
        model
            .on_action(
                &ActionRequest::Attach {
                    direction: Direction::South,
                },
                ActionResult::Success,
                &raw,
            )
            .unwrap();
        assert_eq!(
            model.blocks().get(&Vec2::new(0, 1)),
            Some(&BlockType::new("b2"))
        );
    }

    #[test]
    fn failed_actions_leave_model_unchanged() {
        let mut model = AttachmentModel::new();
        let raw = open_raw(5);
        model
            .on_action(
                &ActionRequest::Attach {
                    direction: Direction::South,
                },
                ActionResult::FailedTarget,
                &raw,
            )
            .unwrap();
        assert!(model.is_empty());
    }

    #[test]
    fn rotate_success_rotates_offsets() {
        let mut model = AttachmentModel::new();
        model.gain(Vec2::new(0, 1), BlockType::new("b0")).unwrap();
        let raw = open_raw(5);
        model
            .on_action(
                &ActionRequest::Rotate {
                    rotation: Rotation::Clockwise,
                },
                ActionResult::Success,
                &raw,
            )
            .unwrap();
        // cw maps (x, y) to (-y, x): south swings to west.
        assert!(model.blocks().contains_key(&Vec2::new(-1, 0)));
    }

    #[test]
    fn gain_at_occupied_offset_is_inconsistent() {
        let mut model = AttachmentModel::new();
        model.gain(Vec2::new(0, 1), BlockType::new("b0")).unwrap();
        assert!(model.gain(Vec2::new(0, 1), BlockType::new("b1")).is_err());
    }

    #[test]
    fn refresh_removes_unflagged_only() {
        let mut model = AttachmentModel::new();
        model.gain(Vec2::new(0, 1), BlockType::new("b0")).unwrap();
        model.gain(Vec2::new(1, 0), BlockType::new("b1")).unwrap();
        let mut raw = open_raw(5);
        raw.attached.push(Vec2::new(0, 1));
        // Foreign flag far away must never be adopted.
        raw.attached.push(Vec2::new(3, 0));
        let removed = model.refresh(&raw);
        assert_eq!(removed, vec![(Vec2::new(1, 0), BlockType::new("b1"))]);
        assert_eq!(model.blocks().len(), 1);
        // Idempotent within the step.
        assert!(model.refresh(&raw).is_empty());
    }

    #[test]
    fn blocked_moves_account_for_swept_cells() {
        let mut model = AttachmentModel::new();
        model.gain(Vec2::new(0, 1), BlockType::new("b0")).unwrap();
        let mut raw = open_raw(5);
        // Obstacle two south: the dragged block would sweep into it.
        for t in raw.terrain.iter_mut() {
            if t.0 == Vec2::new(0, 2) {
                t.1 = Terrain::Obstacle;
            }
        }
        let blocked = model.blocked_moves(&raw);
        assert!(blocked.contains(&Direction::South));
        assert!(!blocked.contains(&Direction::North));
        // The agent's own attachment cell never blocks its own move.
        raw.things.push(block_thing(Vec2::new(0, 1), "b0"));
        raw.attached.push(Vec2::new(0, 1));
        let blocked = model.blocked_moves(&raw);
        assert!(!blocked.contains(&Direction::North));
    }

    #[test]
    fn no_attachments_open_terrain_nothing_blocked() {
        let model = AttachmentModel::new();
        let raw = open_raw(5);
        assert!(model.blocked_moves(&raw).is_empty());
        assert!(model.blocked_rotations(&raw).is_empty());
    }

    #[test]
    fn blocked_rotations_check_destinations() {
        let mut model = AttachmentModel::new();
        model.gain(Vec2::new(0, 1), BlockType::new("b0")).unwrap();
        let mut raw = open_raw(5);
        // Obstacle west: clockwise lands the block there.
        for t in raw.terrain.iter_mut() {
            if t.0 == Vec2::new(-1, 0) {
                t.1 = Terrain::Obstacle;
            }
        }
        let blocked = model.blocked_rotations(&raw);
        assert!(blocked.contains(&Rotation::Clockwise));
        assert!(!blocked.contains(&Rotation::CounterClockwise));
    }
}
