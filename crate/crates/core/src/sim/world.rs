//! World state and the lockstep action resolver.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::geom::{Direction, Rotation, Vec2};
use crate::rng::Pcg32;

use super::{
    ActionEffect, ActionRecord, ActionRequest, ActionResult, BlockId, BlockState, BlockType,
    ClearEvent, ClearEventRecord, ClearVictim, EngineError, EntityState, Requirement, TaskSpec,
    Terrain,
};

/// Everything `apply_step` produced for one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    /// Index parallel to the entity list.
    pub actions: Vec<ActionRecord>,
    /// Clear events that fired after actions resolved.
    pub events: Vec<ClearEventRecord>,
    /// Tasks generated at the start of the step.
    pub new_tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub width: u32,
    pub height: u32,
    terrain: Vec<Terrain>,
    #[serde(with = "crate::geom::serde_vec2_map")]
    dispensers: BTreeMap<Vec2, BlockType>,
    blocks: BTreeMap<BlockId, BlockState>,
    #[serde(with = "crate::geom::serde_vec2_map")]
    cell_blocks: BTreeMap<Vec2, BlockId>,
    /// Block-block welds created by connect, keyed lo < hi.
    bonds: BTreeSet<(BlockId, BlockId)>,
    pub entities: Vec<EntityState>,
    pub tasks: Vec<TaskSpec>,
    pub pending_events: Vec<ClearEvent>,
    pub step: u64,
    pub scores: Vec<u64>,
    pub(super) rng: Pcg32,
    next_block_id: u64,
    pub(super) next_task_id: u64,
    pub(super) config: SimConfig,
    /// Result of each entity's previous action, echoed into percepts.
    last_actions: Vec<Option<(ActionRequest, ActionResult)>>,
}

impl WorldState {
    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn in_bounds(&self, pos: Vec2) -> bool {
        pos.x >= 0 && pos.y >= 0 && (pos.x as u32) < self.width && (pos.y as u32) < self.height
    }

    /// Terrain with the boundary convention: out-of-bounds reads as obstacle.
    pub fn terrain_at(&self, pos: Vec2) -> Terrain {
        if self.in_bounds(pos) {
            self.terrain[(pos.y as u32 * self.width + pos.x as u32) as usize]
        } else {
            Terrain::Obstacle
        }
    }

    fn set_terrain(&mut self, pos: Vec2, t: Terrain) {
        debug_assert!(self.in_bounds(pos));
        let idx = (pos.y as u32 * self.width + pos.x as u32) as usize;
        self.terrain[idx] = t;
    }

    pub fn dispenser_at(&self, pos: Vec2) -> Option<&BlockType> {
        self.dispensers.get(&pos)
    }

    pub fn dispensers(&self) -> &BTreeMap<Vec2, BlockType> {
        &self.dispensers
    }

    pub(super) fn dispensers_mut(&mut self) -> &mut BTreeMap<Vec2, BlockType> {
        &mut self.dispensers
    }

    pub(super) fn push_last_action_slot(&mut self) {
        self.last_actions.push(None);
    }

    pub fn block_at(&self, pos: Vec2) -> Option<(&BlockId, &BlockState)> {
        let id = self.cell_blocks.get(&pos)?;
        Some((id, &self.blocks[id]))
    }

    pub fn block(&self, id: BlockId) -> Option<&BlockState> {
        self.blocks.get(&id)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&BlockId, &BlockState)> {
        self.blocks.iter()
    }

    pub fn entity_at(&self, pos: Vec2) -> Option<&EntityState> {
        self.entities.iter().find(|e| e.pos == pos)
    }

    pub fn last_action(&self, entity: usize) -> Option<&(ActionRequest, ActionResult)> {
        self.last_actions[entity].as_ref()
    }

    pub fn task(&self, name: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.name == name)
    }

    /// Blocks rigidly carried by an entity: direct attachments plus
    /// everything reachable through bonds. Sorted by id.
    pub fn component_of(&self, entity: usize) -> Vec<BlockId> {
        let mut seen: BTreeSet<BlockId> = self
            .blocks
            .iter()
            .filter(|(_, b)| b.attached_to == Some(entity))
            .map(|(id, _)| *id)
            .collect();
        let mut queue: VecDeque<BlockId> = seen.iter().copied().collect();
        while let Some(id) = queue.pop_front() {
            for &(a, b) in &self.bonds {
                let other = if a == id {
                    b
                } else if b == id {
                    a
                } else {
                    continue;
                };
                if seen.insert(other) {
                    queue.push_back(other);
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Attachment set of an entity as (offset in entity frame, block type).
    pub fn attachments_of(&self, entity: usize) -> Vec<(Vec2, BlockType)> {
        let pos = self.entities[entity].pos;
        self.component_of(entity)
            .iter()
            .map(|id| {
                let b = &self.blocks[id];
                (b.pos - pos, b.block_type.clone())
            })
            .collect()
    }

    /// True when the block is carried (directly or via bonds) by any entity.
    pub fn block_is_held(&self, id: BlockId) -> bool {
        // Walk the bond component of the block looking for a direct attachment.
        let mut seen = BTreeSet::from([id]);
        let mut queue = VecDeque::from([id]);
        while let Some(cur) = queue.pop_front() {
            if self.blocks[&cur].attached_to.is_some() {
                return true;
            }
            for &(a, b) in &self.bonds {
                let other = if a == cur {
                    b
                } else if b == cur {
                    a
                } else {
                    continue;
                };
                if seen.insert(other) {
                    queue.push_back(other);
                }
            }
        }
        false
    }

    fn spawn_block(&mut self, pos: Vec2, block_type: BlockType) -> BlockId {
        let id = BlockId(self.next_block_id);
        self.next_block_id += 1;
        self.blocks.insert(
            id,
            BlockState {
                pos,
                block_type,
                attached_to: None,
            },
        );
        self.cell_blocks.insert(pos, id);
        id
    }

    fn destroy_block(&mut self, id: BlockId) {
        if let Some(b) = self.blocks.remove(&id) {
            self.cell_blocks.remove(&b.pos);
        }
        self.bonds.retain(|&(a, b)| a != id && b != id);
    }

    /// Detach all direct attachments of an entity; bonds between the released
    /// blocks survive, so freed chains stay welded.
    fn strip_entity(&mut self, entity: usize) {
        for b in self.blocks.values_mut() {
            if b.attached_to == Some(entity) {
                b.attached_to = None;
            }
        }
    }

    fn disable_entity(&mut self, entity: usize, until: u64) {
        self.strip_entity(entity);
        let e = &mut self.entities[entity];
        e.disabled_until = Some(until);
        e.clear_charge = None;
    }

    /// A cell an entity or a dragged block may enter: in bounds, not an
    /// obstacle, no foreign entity, no foreign block. Dispensers do not
    /// block movement.
    fn cell_enterable(&self, pos: Vec2, moving_entity: usize, moving_blocks: &[BlockId]) -> bool {
        if !self.in_bounds(pos) || self.terrain_at(pos) == Terrain::Obstacle {
            return false;
        }
        if self
            .entities
            .iter()
            .any(|e| e.id != moving_entity && e.pos == pos)
        {
            return false;
        }
        match self.cell_blocks.get(&pos) {
            Some(id) => moving_blocks.contains(id),
            None => true,
        }
    }

    fn move_rigid(&mut self, entity: usize, component: &[BlockId], delta: Vec2) {
        for id in component {
            self.cell_blocks.remove(&self.blocks[id].pos);
        }
        for id in component {
            let b = self.blocks.get_mut(id).expect("component block exists");
            b.pos += delta;
        }
        for id in component {
            self.cell_blocks.insert(self.blocks[id].pos, *id);
        }
        self.entities[entity].pos += delta;
    }

    fn rotate_rigid(&mut self, entity: usize, component: &[BlockId], rotation: Rotation) {
        let center = self.entities[entity].pos;
        for id in component {
            self.cell_blocks.remove(&self.blocks[id].pos);
        }
        for id in component {
            let b = self.blocks.get_mut(id).expect("component block exists");
            b.pos = center + rotation.rotate(b.pos - center);
        }
        for id in component {
            self.cell_blocks.insert(self.blocks[id].pos, *id);
        }
    }

    /// True when some block of the component is directly attached to a
    /// different entity (a shared chain mid connect-handshake).
    fn component_shared(&self, entity: usize, component: &[BlockId]) -> bool {
        component.iter().any(|id| {
            self.blocks[id]
                .attached_to
                .is_some_and(|owner| owner != entity)
        })
    }

    // ------------------------------------------------------------------
    // Step resolution
    // ------------------------------------------------------------------

    /// Resolve one lockstep step: scheduled generation, actions in ascending
    /// entity-id order, then pending clear events, then energy regeneration.
    pub fn apply_step(&mut self, requests: &[ActionRequest]) -> Result<StepOutcome, EngineError> {
        if requests.len() != self.entities.len() {
            return Err(EngineError::MalformedActions {
                expected: self.entities.len(),
                got: requests.len(),
            });
        }
        let step = self.step;

        let mut new_tasks = Vec::new();
        if self.config.task_interval > 0 && step.is_multiple_of(self.config.task_interval) {
            let task = self.generate_task();
            new_tasks.push(task.clone());
            self.tasks.push(task);
        }
        self.maybe_schedule_event();

        let mut records: Vec<Option<ActionRecord>> = vec![None; requests.len()];
        for id in 0..requests.len() {
            if records[id].is_some() {
                continue; // resolved as the partner of an earlier connect
            }
            let record = if self.entities[id].is_disabled(step) {
                // Disabled entities are forced to skip.
                ActionRecord {
                    request: ActionRequest::Skip,
                    result: ActionResult::Success,
                    effect: None,
                }
            } else {
                self.resolve_action(id, requests, &mut records)
            };
            records[id] = Some(record);
        }
        let actions: Vec<ActionRecord> = records.into_iter().map(|r| r.unwrap()).collect();
        for (id, rec) in actions.iter().enumerate() {
            self.last_actions[id] = Some((rec.request.clone(), rec.result));
        }

        let events = self.fire_due_events(step);

        for e in &mut self.entities {
            e.energy = (e.energy + self.config.energy_regen).min(self.config.energy_start);
        }

        self.step += 1;
        Ok(StepOutcome {
            actions,
            events,
            new_tasks,
        })
    }

    fn resolve_action(
        &mut self,
        id: usize,
        requests: &[ActionRequest],
        records: &mut [Option<ActionRecord>],
    ) -> ActionRecord {
        let request = requests[id].clone();
        // Any action other than clear breaks a clear charge streak.
        if !matches!(request, ActionRequest::Clear { .. }) {
            self.entities[id].clear_charge = None;
        }
        let (result, effect) = match &request {
            ActionRequest::Skip => (ActionResult::Success, None),
            ActionRequest::Move { direction } => (self.do_move(id, *direction), None),
            ActionRequest::Rotate { rotation } => (self.do_rotate(id, *rotation), None),
            ActionRequest::Attach { direction } => self.do_attach(id, *direction),
            ActionRequest::Detach { direction } => self.do_detach(id, *direction),
            ActionRequest::Request { direction } => self.do_request(id, *direction),
            ActionRequest::Clear { offset } => self.do_clear(id, *offset),
            ActionRequest::Submit { task } => self.do_submit(id, task),
            ActionRequest::Connect { partner, offset } => {
                return self.do_connect(id, *partner, *offset, requests, records);
            }
        };
        ActionRecord {
            request,
            result,
            effect,
        }
    }

    fn do_move(&mut self, id: usize, direction: Direction) -> ActionResult {
        let component = self.component_of(id);
        if self.component_shared(id, &component) {
            return ActionResult::FailedBlocked;
        }
        let delta = direction.delta();
        let entity_dest = self.entities[id].pos + delta;
        let mut dests = vec![entity_dest];
        dests.extend(component.iter().map(|b| self.blocks[b].pos + delta));
        if dests
            .iter()
            .all(|&d| self.cell_enterable(d, id, &component))
        {
            self.move_rigid(id, &component, delta);
            ActionResult::Success
        } else {
            ActionResult::FailedBlocked
        }
    }

    fn do_rotate(&mut self, id: usize, rotation: Rotation) -> ActionResult {
        let component = self.component_of(id);
        if self.component_shared(id, &component) {
            return ActionResult::FailedBlocked;
        }
        let center = self.entities[id].pos;
        let ok = component.iter().all(|b| {
            let dest = center + rotation.rotate(self.blocks[b].pos - center);
            self.cell_enterable(dest, id, &component)
        });
        if ok {
            self.rotate_rigid(id, &component, rotation);
            ActionResult::Success
        } else {
            ActionResult::FailedBlocked
        }
    }

    fn do_attach(&mut self, id: usize, direction: Direction) -> (ActionResult, Option<ActionEffect>) {
        let cell = self.entities[id].pos + direction.delta();
        match self.cell_blocks.get(&cell).copied() {
            Some(block_id) if self.blocks[&block_id].attached_to.is_none() => {
                self.blocks.get_mut(&block_id).unwrap().attached_to = Some(id);
                (
                    ActionResult::Success,
                    Some(ActionEffect::Attached { block: block_id }),
                )
            }
            _ => (ActionResult::FailedTarget, None),
        }
    }

    fn do_detach(&mut self, id: usize, direction: Direction) -> (ActionResult, Option<ActionEffect>) {
        let cell = self.entities[id].pos + direction.delta();
        match self.cell_blocks.get(&cell).copied() {
            Some(block_id) if self.blocks[&block_id].attached_to == Some(id) => {
                self.blocks.get_mut(&block_id).unwrap().attached_to = None;
                (
                    ActionResult::Success,
                    Some(ActionEffect::Detached { block: block_id }),
                )
            }
            _ => (ActionResult::FailedTarget, None),
        }
    }

    fn do_request(&mut self, id: usize, direction: Direction) -> (ActionResult, Option<ActionEffect>) {
        let cell = self.entities[id].pos + direction.delta();
        let Some(block_type) = self.dispensers.get(&cell).cloned() else {
            return (ActionResult::FailedTarget, None);
        };
        if self.cell_blocks.contains_key(&cell) || self.entities.iter().any(|e| e.pos == cell) {
            return (ActionResult::FailedBlocked, None);
        }
        let block = self.spawn_block(cell, block_type);
        (ActionResult::Success, Some(ActionEffect::Dispensed { block }))
    }

    fn do_clear(&mut self, id: usize, offset: Vec2) -> (ActionResult, Option<ActionEffect>) {
        let target = self.entities[id].pos + offset;
        if offset.manhattan() > self.config.vision_radius || !self.in_bounds(target) {
            self.entities[id].clear_charge = None;
            return (ActionResult::FailedTarget, None);
        }
        let count = match self.entities[id].clear_charge {
            Some((held, n)) if held == target => n + 1,
            _ => 1,
        };
        if count < 3 {
            self.entities[id].clear_charge = Some((target, count));
            return (ActionResult::Success, None);
        }
        // Third consecutive step on the same target: trigger.
        self.entities[id].clear_charge = None;
        if self.entities[id].energy < self.config.clear_energy_cost {
            return (ActionResult::FailedResources, None);
        }
        self.entities[id].energy -= self.config.clear_energy_cost;
        let effect = self.trigger_clear_at(target);
        (ActionResult::Success, Some(effect))
    }

    /// Apply a triggered clear to exactly the target cell, reporting which
    /// entities were hit through disabling or block loss.
    fn trigger_clear_at(&mut self, target: Vec2) -> ActionEffect {
        let step = self.step;
        let mut destroyed = Vec::new();
        let mut victims: Vec<ClearVictim> = Vec::new();

        let victim_facts = |world: &WorldState, entity: usize, disabled: bool| {
            let e = &world.entities[entity];
            ClearVictim {
                entity,
                team: e.team,
                on_goal: world.terrain_at(e.pos) == Terrain::Goal,
                had_attachment: !world.component_of(entity).is_empty(),
                disabled,
            }
        };

        if let Some(&block_id) = self.cell_blocks.get(&target) {
            // Whoever carries this block loses it; capture their state first.
            for e in 0..self.entities.len() {
                if self.component_of(e).contains(&block_id) {
                    victims.push(victim_facts(self, e, false));
                }
            }
            destroyed.push(block_id);
            self.destroy_block(block_id);
        }
        if self.terrain_at(target) == Terrain::Obstacle {
            self.set_terrain(target, Terrain::Empty);
        }
        if let Some(hit) = self.entities.iter().position(|e| e.pos == target) {
            let facts = victim_facts(self, hit, true);
            if let Some(v) = victims.iter_mut().find(|v| v.entity == hit) {
                v.disabled = true;
            } else {
                victims.push(facts);
            }
            self.disable_entity(hit, step + self.config.disable_duration);
        }
        ActionEffect::ClearTriggered {
            target,
            destroyed_blocks: destroyed,
            victims,
        }
    }

    fn do_submit(&mut self, id: usize, task_name: &str) -> (ActionResult, Option<ActionEffect>) {
        let step = self.step;
        let pos = self.entities[id].pos;
        let team = self.entities[id].team;
        if self.terrain_at(pos) != Terrain::Goal {
            return (ActionResult::FailedTarget, None);
        }
        let Some(task_idx) = self.tasks.iter().position(|t| t.name == task_name) else {
            return (ActionResult::FailedTarget, None);
        };
        if self.tasks[task_idx].submitted_by.is_some() {
            return (ActionResult::FailedTarget, None);
        }
        if self.tasks[task_idx].expired(step) {
            return (ActionResult::FailedDeadline, None);
        }
        // Superset match: every requirement cell must hold a block of the
        // right type carried by the submitter; extra attachments are fine.
        let component = self.component_of(id);
        let mut consumed = Vec::new();
        for req in &self.tasks[task_idx].requirements {
            let cell = pos + req.offset();
            match self.cell_blocks.get(&cell) {
                Some(bid)
                    if component.contains(bid)
                        && self.blocks[bid].block_type == req.block_type =>
                {
                    consumed.push(*bid)
                }
                _ => return (ActionResult::FailedTarget, None),
            }
        }
        let reward = self.tasks[task_idx].reward;
        self.tasks[task_idx].submitted_by = Some(team);
        self.scores[team as usize] += reward;
        for bid in &consumed {
            self.destroy_block(*bid);
        }
        (
            ActionResult::Success,
            Some(ActionEffect::Submitted {
                task: task_name.to_string(),
                reward,
                consumed,
            }),
        )
    }

    fn do_connect(
        &mut self,
        id: usize,
        partner: usize,
        offset: Vec2,
        requests: &[ActionRequest],
        records: &mut [Option<ActionRecord>],
    ) -> ActionRecord {
        let request = requests[id].clone();
        let fail = |result| ActionRecord {
            request: request.clone(),
            result,
            effect: None,
        };
        if partner >= self.entities.len() || partner == id {
            return fail(ActionResult::FailedPartner);
        }
        if self.entities[partner].is_disabled(self.step) {
            return fail(ActionResult::FailedPartner);
        }
        let reciprocal = matches!(
            &requests[partner],
            ActionRequest::Connect { partner: p, .. } if *p == id
        );
        if !reciprocal {
            return fail(ActionResult::FailedPartner);
        }
        let ActionRequest::Connect {
            offset: partner_offset,
            ..
        } = &requests[partner]
        else {
            unreachable!()
        };

        let my_cell = self.entities[id].pos + offset;
        let partner_cell = self.entities[partner].pos + *partner_offset;
        let my_block = self.cell_blocks.get(&my_cell).copied();
        let partner_block = self.cell_blocks.get(&partner_cell).copied();
        let valid = match (my_block, partner_block) {
            (Some(a), Some(b)) => {
                a != b
                    && self.component_of(id).contains(&a)
                    && self.component_of(partner).contains(&b)
                    && my_cell.manhattan_to(partner_cell) == 1
            }
            _ => false,
        };
        let partner_request = requests[partner].clone();
        if !valid {
            // The pair fails as a unit; settle the partner's slot too.
            if records[partner].is_none() {
                records[partner] = Some(ActionRecord {
                    request: partner_request,
                    result: ActionResult::FailedTarget,
                    effect: None,
                });
            }
            return fail(ActionResult::FailedTarget);
        }
        let (a, b) = (my_block.unwrap(), partner_block.unwrap());
        let bond = if a < b { (a, b) } else { (b, a) };
        self.bonds.insert(bond);
        records[partner] = Some(ActionRecord {
            request: partner_request,
            result: ActionResult::Success,
            effect: Some(ActionEffect::Connected {
                partner: id,
                own_block: b,
                partner_block: a,
            }),
        });
        ActionRecord {
            request,
            result: ActionResult::Success,
            effect: Some(ActionEffect::Connected {
                partner,
                own_block: a,
                partner_block: b,
            }),
        }
    }

    fn maybe_schedule_event(&mut self) {
        if self.config.clear_event_rate <= 0.0 {
            return;
        }
        if self.rng.gen_f64() >= self.config.clear_event_rate {
            return;
        }
        let center = Vec2::new(
            self.rng.gen_range(self.width) as i32,
            self.rng.gen_range(self.height) as i32,
        );
        let radius = 1 + self.rng.gen_range(self.config.clear_event_radius.max(1));
        self.pending_events.push(ClearEvent {
            center,
            radius,
            trigger_step: self.step + self.config.clear_event_delay,
        });
    }

    fn fire_due_events(&mut self, step: u64) -> Vec<ClearEventRecord> {
        let due: Vec<ClearEvent> = {
            let (due, rest): (Vec<_>, Vec<_>) = self
                .pending_events
                .drain(..)
                .partition(|e| e.trigger_step <= step);
            self.pending_events = rest;
            due
        };
        due.into_iter().map(|e| self.fire_event(e, step)).collect()
    }

    fn fire_event(&mut self, event: ClearEvent, step: u64) -> ClearEventRecord {
        let area: Vec<Vec2> = area_cells(event.center, event.radius)
            .into_iter()
            .filter(|c| self.in_bounds(*c))
            .collect();

        let mut destroyed = Vec::new();
        for cell in &area {
            if let Some(&bid) = self.cell_blocks.get(cell) {
                destroyed.push(bid);
            }
        }
        for bid in &destroyed {
            self.destroy_block(*bid);
        }
        for cell in &area {
            if self.terrain_at(*cell) == Terrain::Obstacle {
                self.set_terrain(*cell, Terrain::Empty);
            }
        }
        let mut disabled = Vec::new();
        for e in 0..self.entities.len() {
            if area.contains(&self.entities[e].pos) {
                self.disable_entity(e, step + self.config.disable_duration);
                disabled.push(e);
            }
        }
        // Regrow a few obstacles inside the cleared area.
        let mut regenerated = Vec::new();
        let mut candidates: Vec<Vec2> = area
            .iter()
            .copied()
            .filter(|c| {
                self.terrain_at(*c) == Terrain::Empty
                    && !self.cell_blocks.contains_key(c)
                    && !self.dispensers.contains_key(c)
                    && !self.entities.iter().any(|e| e.pos == *c)
            })
            .collect();
        for _ in 0..self.config.regen_obstacles {
            if candidates.is_empty() {
                break;
            }
            let idx = self.rng.pick(candidates.len());
            let cell = candidates.swap_remove(idx);
            self.set_terrain(cell, Terrain::Obstacle);
            regenerated.push(cell);
        }
        regenerated.sort();
        ClearEventRecord {
            center: event.center,
            radius: event.radius,
            destroyed_blocks: destroyed,
            disabled_entities: disabled,
            regenerated,
        }
    }
}

/// Cells within a Manhattan radius, in (y, x) order.
pub(super) fn area_cells(center: Vec2, radius: u32) -> Vec<Vec2> {
    let r = radius as i32;
    let mut cells = Vec::new();
    for dy in -r..=r {
        let span = r - dy.abs();
        for dx in -span..=span {
            cells.push(center + Vec2::new(dx, dy));
        }
    }
    cells
}

/// Programmatic world construction for scripted scenarios and tests.
pub struct WorldBuilder {
    config: SimConfig,
    terrain: Vec<Terrain>,
    dispensers: BTreeMap<Vec2, BlockType>,
    entities: Vec<EntityState>,
    tasks: Vec<TaskSpec>,
    blocks: Vec<(Vec2, BlockType, Option<usize>)>,
}

impl WorldBuilder {
    pub fn new(config: SimConfig) -> Self {
        let size = (config.width * config.height) as usize;
        WorldBuilder {
            config,
            terrain: vec![Terrain::Empty; size],
            dispensers: BTreeMap::new(),
            entities: Vec::new(),
            tasks: Vec::new(),
            blocks: Vec::new(),
        }
    }

    pub fn terrain(mut self, pos: Vec2, t: Terrain) -> Self {
        let idx = (pos.y as u32 * self.config.width + pos.x as u32) as usize;
        self.terrain[idx] = t;
        self
    }

    pub fn goal_area(mut self, center: Vec2, radius: u32) -> Self {
        for cell in area_cells(center, radius) {
            if cell.x >= 0
                && cell.y >= 0
                && (cell.x as u32) < self.config.width
                && (cell.y as u32) < self.config.height
            {
                self = self.terrain(cell, Terrain::Goal);
            }
        }
        self
    }

    pub fn dispenser(mut self, pos: Vec2, block_type: impl Into<BlockType>) -> Self {
        self.dispensers.insert(pos, block_type.into());
        self
    }

    /// Entities must be added in id order, team by team.
    pub fn entity(mut self, team: u32, pos: Vec2) -> Self {
        let id = self.entities.len();
        self.entities.push(EntityState {
            id,
            team,
            pos,
            energy: self.config.energy_start,
            disabled_until: None,
            clear_charge: None,
        });
        self
    }

    pub fn task(mut self, name: &str, deadline: u64, reward: u64, reqs: Vec<Requirement>) -> Self {
        self.tasks.push(TaskSpec {
            name: name.to_string(),
            deadline,
            reward,
            requirements: reqs,
            submitted_by: None,
        });
        self
    }

    /// Place a pre-existing block, optionally already attached to an entity.
    pub fn block(mut self, pos: Vec2, block_type: impl Into<BlockType>, attached_to: Option<usize>) -> Self {
        self.blocks.push((pos, block_type.into(), attached_to));
        self
    }

    pub fn build(self) -> WorldState {
        let n = self.entities.len();
        let teams = self.config.teams as usize;
        let mut world = WorldState {
            width: self.config.width,
            height: self.config.height,
            terrain: self.terrain,
            dispensers: self.dispensers,
            blocks: BTreeMap::new(),
            cell_blocks: BTreeMap::new(),
            bonds: BTreeSet::new(),
            entities: self.entities,
            tasks: self.tasks,
            pending_events: Vec::new(),
            step: 0,
            scores: vec![0; teams],
            rng: Pcg32::new(self.config.seed, 1),
            next_block_id: 0,
            // Handcrafted worlds may carry fixture tasks named task0..;
            // generated names start later to avoid collisions.
            next_task_id: 100,
            config: self.config,
            last_actions: vec![None; n],
        };
        for (pos, ty, attached) in self.blocks {
            let id = world.spawn_block(pos, ty);
            world.blocks.get_mut(&id).unwrap().attached_to = attached;
        }
        world
    }
}
