//! Agent decision logic as explicit state machines.
//!
//! Builders move through obtain / deliver / connect / submit sub-goals with
//! a master builder coordinating its sub-team; attackers monitor goal
//! clusters and charge clears at opposing blocks. Shared machinery covers
//! movement contingency (rotate until a move unblocks), frontier
//! exploration, and clearing a way out when caged in.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::attach::AttachmentModel;
use crate::config::{entity_of_name, operator_name, team_name, SimConfig};
use crate::geom::{Direction, Rotation, Vec2};
use crate::map::{ExploreStep, MapModel, MapPercept};
use crate::pipeline::AgentSnapshot;
use crate::sim::{ActionRequest, BlockType, RawPerceptSet, Requirement, Terrain, ThingKind};

// ---------------------------------------------------------------------------
// Coordination messages
// ---------------------------------------------------------------------------

/// Messages between operator, master and slaves of one task. Delivered at
/// step boundaries in deterministic (sender, recipient, body) order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Assign {
        task: String,
        deadline: u64,
        req: Requirement,
        plan: Vec<Requirement>,
        /// (agent, requirement) for the whole sub-team, in plan order.
        roster: Vec<(String, Requirement)>,
    },
    Cancel {
        task: String,
    },
    DeliverRequest {
        task: String,
        /// Destination cell for the slave's block, in the master's frame.
        dest: Vec2,
        master: String,
    },
    Delivered {
        task: String,
        slave: String,
    },
    ReadyToConnect {
        task: String,
    },
    ConnectDone {
        task: String,
    },
    TaskSubmitted {
        task: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Envelope {
    pub from: String,
    pub to: String,
    pub body: Message,
}

// ---------------------------------------------------------------------------
// Builder state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentCtx {
    pub task: String,
    pub deadline: u64,
    pub req: Requirement,
    pub plan: Vec<Requirement>,
    pub roster: Vec<(String, Requirement)>,
}

impl AssignmentCtx {
    pub fn master(&self) -> &str {
        self.roster
            .iter()
            .find(|(_, r)| r.offset() == Vec2::new(0, 1))
            .map(|(a, _)| a.as_str())
            .expect("every plan starts at (0, 1)")
    }

    pub fn is_master(&self, me: &str) -> bool {
        self.master() == me
    }

    fn slave_for(&self, req: &Requirement) -> Option<&str> {
        self.roster
            .iter()
            .find(|(_, r)| r == req)
            .map(|(a, _)| a.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuilderPhase {
    #[default]
    Free,
    /// Detach everything, then restart the current assignment (or go free).
    Resetting,
    Obtaining,
    /// Slave holding its block, exploring until the master calls.
    AwaitingTurn,
    Delivering {
        dest: Vec2,
    },
    /// Block in place, `Delivered` sent, waiting for `ReadyToConnect`.
    AwaitConnectSignal {
        dest: Vec2,
    },
    /// Issue the connect every step until it lands.
    Connecting {
        dest: Vec2,
    },
    /// Connect succeeded: release the delivered block.
    Detaching {
        dest: Vec2,
    },
    /// Own part done; wander until the operator frees the sub-team.
    SubmittingSupport,
    /// Master: pick the meeting point, get there, face the block south.
    MasterMoving,
    /// Master at the meeting point, walking the plan slave by slave.
    MasterCollecting {
        next: usize,
        requested: bool,
        /// Step at which both sides agreed to connect.
        connect_step: Option<u64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuilderState {
    pub phase: BuilderPhase,
    pub assignment: Option<AssignmentCtx>,
    pub meeting_point: Option<Vec2>,
    /// Deliver destination received while blockless, honored after obtaining.
    pub pending_deliver: Option<Vec2>,
    pub fail_streak: u32,
    nav: Option<NavState>,
}

impl BuilderState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Outcome of one decide call.
pub struct Decision {
    pub action: ActionRequest,
    pub outbox: Vec<Envelope>,
    /// Block gained through a successful connect (master side); the runner
    /// applies it to the agent's attachment model.
    pub gained: Option<(Vec2, BlockType)>,
}

// ---------------------------------------------------------------------------
// Builder decide
// ---------------------------------------------------------------------------

pub fn builder_decide(
    config: &SimConfig,
    snap: &AgentSnapshot,
    state: &mut BuilderState,
    inbox: &[Envelope],
) -> Decision {
    let mut outbox = Vec::new();
    let gained = process_results(snap, state, &mut outbox);
    process_inbox(snap, state, inbox, &mut outbox);

    if state.fail_streak >= config.fail_tolerance {
        state.fail_streak = 0;
        state.meeting_point = None;
        state.phase = BuilderPhase::Resetting;
    }

    // Caged in: clearing out trumps everything else.
    let action = match unstuck_decide(config, snap) {
        Some(unstick) => unstick,
        None => dispatch(config, snap, state, &mut outbox),
    };
    Decision {
        action,
        outbox,
        gained,
    }
}

/// Streak bookkeeping plus the transitions that hang off the previous
/// action's result (the connect handshake on both sides).
fn process_results(
    snap: &AgentSnapshot,
    state: &mut BuilderState,
    outbox: &mut Vec<Envelope>,
) -> Option<(Vec2, BlockType)> {
    let raw = &snap.raw;
    let result = raw.last_action_result?;
    if result.is_success() {
        state.fail_streak = 0;
    } else if !matches!(raw.last_action, Some(ActionRequest::Skip) | None) {
        state.fail_streak += 1;
    }
    // A successful submit finishes the assignment for the master; slaves
    // hear about it through TaskSubmitted.
    if matches!(raw.last_action, Some(ActionRequest::Submit { .. })) && result.is_success() {
        state.assignment = None;
        state.meeting_point = None;
        state.pending_deliver = None;
        state.phase = BuilderPhase::Resetting;
        return None;
    }

    let was_connect = matches!(raw.last_action, Some(ActionRequest::Connect { .. }));
    if !(was_connect && result.is_success()) {
        return None;
    }

    match state.phase.clone() {
        BuilderPhase::Connecting { dest } => {
            // Slave side: detach from the delivered block next.
            if let Some(ctx) = &state.assignment {
                outbox.push(Envelope {
                    from: snap.name.clone(),
                    to: ctx.master().to_string(),
                    body: Message::ConnectDone {
                        task: ctx.task.clone(),
                    },
                });
            }
            state.phase = BuilderPhase::Detaching { dest };
            None
        }
        BuilderPhase::MasterCollecting {
            next,
            connect_step: Some(_),
            ..
        } => {
            // Master side: the slave's block is now part of the chain.
            let ctx = state.assignment.clone()?;
            let req = ctx.plan[next].clone();
            if let Some(slave) = ctx.slave_for(&req) {
                outbox.push(Envelope {
                    from: snap.name.clone(),
                    to: slave.to_string(),
                    body: Message::ConnectDone {
                        task: ctx.task.clone(),
                    },
                });
            }
            state.phase = BuilderPhase::MasterCollecting {
                next: next + 1,
                requested: false,
                connect_step: None,
            };
            Some((req.offset(), req.block_type))
        }
        _ => None,
    }
}

fn process_inbox(
    snap: &AgentSnapshot,
    state: &mut BuilderState,
    inbox: &[Envelope],
    outbox: &mut Vec<Envelope>,
) {
    for env in inbox {
        match &env.body {
            Message::Assign {
                task,
                deadline,
                req,
                plan,
                roster,
            } => {
                state.assignment = Some(AssignmentCtx {
                    task: task.clone(),
                    deadline: *deadline,
                    req: req.clone(),
                    plan: plan.clone(),
                    roster: roster.clone(),
                });
                state.meeting_point = None;
                state.pending_deliver = None;
                state.phase = BuilderPhase::Obtaining;
            }
            Message::Cancel { task } | Message::TaskSubmitted { task } => {
                if state.assignment.as_ref().is_some_and(|a| &a.task == task) {
                    state.assignment = None;
                    state.meeting_point = None;
                    state.pending_deliver = None;
                    state.phase = BuilderPhase::Resetting;
                }
            }
            Message::DeliverRequest { task, dest, master } => {
                let Some(ctx) = &state.assignment else { continue };
                if &ctx.task != task || ctx.is_master(&snap.name) {
                    continue;
                }
                // The destination arrives in the master's frame.
                let Some(translation) = snap.identified.get(master) else {
                    continue;
                };
                let dest_own = translation.apply(*dest);
                if snap.attach.has_type(&ctx.req.block_type).is_some() {
                    state.phase = BuilderPhase::Delivering { dest: dest_own };
                } else {
                    state.pending_deliver = Some(dest_own);
                    state.phase = BuilderPhase::Obtaining;
                }
            }
            Message::ReadyToConnect { task } => {
                if state.assignment.as_ref().is_some_and(|a| &a.task == task) {
                    if let BuilderPhase::AwaitConnectSignal { dest } = state.phase {
                        state.phase = BuilderPhase::Connecting { dest };
                    }
                }
            }
            Message::Delivered { task, slave } => {
                // Master: acknowledge and schedule the reciprocal connect for
                // the next step, when the slave will have our ReadyToConnect.
                let BuilderPhase::MasterCollecting {
                    next,
                    requested: true,
                    connect_step: None,
                } = state.phase
                else {
                    continue;
                };
                let Some(ctx) = &state.assignment else { continue };
                if &ctx.task != task || next >= ctx.plan.len() {
                    continue;
                }
                if ctx.slave_for(&ctx.plan[next]) != Some(slave.as_str()) {
                    continue;
                }
                outbox.push(Envelope {
                    from: snap.name.clone(),
                    to: slave.clone(),
                    body: Message::ReadyToConnect {
                        task: ctx.task.clone(),
                    },
                });
                state.phase = BuilderPhase::MasterCollecting {
                    next,
                    requested: true,
                    connect_step: Some(snap.step + 1),
                };
            }
            Message::ConnectDone { .. } => {}
        }
    }
}

fn dispatch(
    config: &SimConfig,
    snap: &AgentSnapshot,
    state: &mut BuilderState,
    outbox: &mut Vec<Envelope>,
) -> ActionRequest {
    match state.phase.clone() {
        BuilderPhase::Free | BuilderPhase::SubmittingSupport | BuilderPhase::AwaitingTurn => {
            explore_action(config, snap)
        }
        BuilderPhase::Resetting => {
            if snap.attach.is_empty() {
                state.phase = if state.assignment.is_some() {
                    BuilderPhase::Obtaining
                } else {
                    BuilderPhase::Free
                };
                return dispatch(config, snap, state, outbox);
            }
            // Detach whatever is within reach; refresh scrubs the rest once
            // the chain is let go.
            match adjacent_attachment(&snap.attach) {
                Some(direction) => ActionRequest::Detach { direction },
                None => ActionRequest::Skip,
            }
        }
        BuilderPhase::Obtaining => obtain(config, snap, state, outbox),
        BuilderPhase::Delivering { dest } => deliver(config, snap, state, dest, outbox),
        BuilderPhase::AwaitConnectSignal { .. } => ActionRequest::Skip,
        BuilderPhase::Connecting { dest } => {
            let Some(ctx) = state.assignment.clone() else {
                state.phase = BuilderPhase::Resetting;
                return ActionRequest::Skip;
            };
            match entity_of_name(config, ctx.master()) {
                Some(partner) => ActionRequest::Connect {
                    partner,
                    offset: dest - snap.virtual_pos,
                },
                None => ActionRequest::Skip,
            }
        }
        BuilderPhase::Detaching { dest } => {
            let offset = dest - snap.virtual_pos;
            if snap.attach.blocks().contains_key(&offset) {
                if let Some(direction) = Direction::from_delta(offset) {
                    return ActionRequest::Detach { direction };
                }
            }
            state.phase = BuilderPhase::SubmittingSupport;
            explore_action(config, snap)
        }
        BuilderPhase::MasterMoving => master_moving(config, snap, state, outbox),
        BuilderPhase::MasterCollecting {
            next,
            requested,
            connect_step,
        } => master_collecting(config, snap, state, next, requested, connect_step, outbox),
    }
}

fn adjacent_attachment(attach: &AttachmentModel) -> Option<Direction> {
    attach
        .blocks()
        .keys()
        .find_map(|o| Direction::from_delta(*o))
}

fn obtain(
    config: &SimConfig,
    snap: &AgentSnapshot,
    state: &mut BuilderState,
    outbox: &mut Vec<Envelope>,
) -> ActionRequest {
    let Some(ctx) = state.assignment.clone() else {
        state.phase = BuilderPhase::Free;
        return explore_action(config, snap);
    };
    let needed = ctx.req.block_type.clone();

    // Drop everything that is not the one block we are responsible for,
    // but never litter a goal cluster.
    let keep = snap.attach.has_type(&needed);
    let irrelevant: Vec<Vec2> = snap
        .attach
        .blocks()
        .keys()
        .copied()
        .filter(|o| Some(*o) != keep)
        .collect();
    if !irrelevant.is_empty() {
        if snap.raw.terrain_at(Vec2::ZERO) == Some(Terrain::Goal) {
            return explore_action(config, snap);
        }
        if let Some(direction) = irrelevant.iter().find_map(|o| Direction::from_delta(*o)) {
            return ActionRequest::Detach { direction };
        }
        return ActionRequest::Skip;
    }

    if keep.is_some() {
        // Block secured; branch master/slave and act right away.
        state.phase = if ctx.is_master(&snap.name) {
            BuilderPhase::MasterMoving
        } else if let Some(dest) = state.pending_deliver.take() {
            BuilderPhase::Delivering { dest }
        } else {
            BuilderPhase::AwaitingTurn
        };
        return dispatch(config, snap, state, outbox);
    }

    // Find a dispenser of the needed type; explore until one is known.
    let Some(dispenser) = snap
        .map
        .find_nearest(snap.virtual_pos, |p| p.has_dispenser(&needed))
    else {
        return explore_action(config, snap);
    };
    let rel = dispenser - snap.virtual_pos;
    if rel.manhattan() == 1 {
        let direction = Direction::from_delta(rel).unwrap();
        let block_there = snap
            .raw
            .things_at(rel)
            .any(|t| matches!(t.kind, ThingKind::Block { .. }));
        if block_there {
            if snap.raw.is_attached(rel) {
                // Someone's chain is parked on the dispenser; wander off.
                return explore_action(config, snap);
            }
            return ActionRequest::Attach { direction };
        }
        return ActionRequest::Request { direction };
    }
    match navigate(snap, dispenser, true, &mut state.nav) {
        NavStep::Arrived => ActionRequest::Skip,
        NavStep::Step(action) => action,
        NavStep::Stuck => explore_action(config, snap),
    }
}

fn deliver(
    config: &SimConfig,
    snap: &AgentSnapshot,
    state: &mut BuilderState,
    dest: Vec2,
    outbox: &mut Vec<Envelope>,
) -> ActionRequest {
    let Some(ctx) = state.assignment.clone() else {
        state.phase = BuilderPhase::Resetting;
        return ActionRequest::Skip;
    };
    let Some(block_offset) = snap.attach.has_type(&ctx.req.block_type) else {
        // Lost the block (clear event, reset); fetch a fresh one.
        state.pending_deliver = Some(dest);
        state.phase = BuilderPhase::Obtaining;
        return obtain(config, snap, state, outbox);
    };

    if snap.virtual_pos + block_offset == dest {
        // In place: tell the master and hold still.
        outbox.push(Envelope {
            from: snap.name.clone(),
            to: ctx.master().to_string(),
            body: Message::Delivered {
                task: ctx.task.clone(),
                slave: snap.name.clone(),
            },
        });
        state.phase = BuilderPhase::AwaitConnectSignal { dest };
        return ActionRequest::Skip;
    }

    if snap.virtual_pos == dest {
        // Standing on the destination itself; step off.
        let blocked = snap.attach.blocked_moves(&snap.raw);
        for d in Direction::ALL {
            if !blocked.contains(&d) {
                return ActionRequest::Move { direction: d };
            }
        }
        return ActionRequest::Skip;
    }

    if snap.virtual_pos.manhattan_to(dest) == 1 {
        // Adjacent: rotate the block onto the destination cell.
        let want = dest - snap.virtual_pos;
        match rotate_toward(&snap.attach, &snap.raw, block_offset, want) {
            RotatePlan::Already => ActionRequest::Skip,
            RotatePlan::Turn(r) => ActionRequest::Rotate { rotation: r },
            RotatePlan::Stuck => {
                // Try delivering from a different neighbour of the target.
                match alternative_neighbour(&snap.map, dest, snap.virtual_pos) {
                    Some(other) => match navigate(snap, other, false, &mut state.nav) {
                        NavStep::Step(a) => a,
                        _ => ActionRequest::Skip,
                    },
                    None => ActionRequest::Skip,
                }
            }
        }
    } else {
        match navigate(snap, dest, true, &mut state.nav) {
            NavStep::Arrived => ActionRequest::Skip,
            NavStep::Step(action) => action,
            NavStep::Stuck => explore_action(config, snap),
        }
    }
}

fn alternative_neighbour(map: &MapModel, dest: Vec2, current: Vec2) -> Option<Vec2> {
    dest.neighbours()
        .into_iter()
        .filter(|n| *n != current && map.cell(*n).is_some_and(MapPercept::traversable))
        .min()
}

fn master_moving(
    config: &SimConfig,
    snap: &AgentSnapshot,
    state: &mut BuilderState,
    outbox: &mut Vec<Envelope>,
) -> ActionRequest {
    let Some(ctx) = state.assignment.clone() else {
        state.phase = BuilderPhase::Resetting;
        return ActionRequest::Skip;
    };
    let Some(block_offset) = snap.attach.has_type(&ctx.req.block_type) else {
        state.phase = BuilderPhase::Obtaining;
        return obtain(config, snap, state, outbox);
    };

    if state.meeting_point.is_none() {
        state.meeting_point = choose_meeting_point(snap, &ctx.plan);
    }
    let Some(meeting) = state.meeting_point else {
        // No goal cell known (or none fits): explore until one shows up.
        return explore_action(config, snap);
    };

    if snap.virtual_pos == meeting {
        let want = Vec2::new(0, 1);
        if block_offset == want {
            state.phase = BuilderPhase::MasterCollecting {
                next: 1,
                requested: false,
                connect_step: None,
            };
            return master_collecting(config, snap, state, 1, false, None, outbox);
        }
        match rotate_toward(&snap.attach, &snap.raw, block_offset, want) {
            RotatePlan::Already => ActionRequest::Skip,
            RotatePlan::Turn(r) => ActionRequest::Rotate { rotation: r },
            RotatePlan::Stuck => {
                // Meeting point no good after all; drop it and re-choose.
                state.meeting_point = None;
                ActionRequest::Skip
            }
        }
    } else {
        match navigate(snap, meeting, false, &mut state.nav) {
            NavStep::Arrived => ActionRequest::Skip,
            NavStep::Step(action) => action,
            NavStep::Stuck => {
                state.meeting_point = None;
                explore_action(config, snap)
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn master_collecting(
    config: &SimConfig,
    snap: &AgentSnapshot,
    state: &mut BuilderState,
    next: usize,
    requested: bool,
    connect_step: Option<u64>,
    outbox: &mut Vec<Envelope>,
) -> ActionRequest {
    let Some(ctx) = state.assignment.clone() else {
        state.phase = BuilderPhase::Resetting;
        return ActionRequest::Skip;
    };
    let Some(meeting) = state.meeting_point else {
        state.phase = BuilderPhase::MasterMoving;
        return master_moving(config, snap, state, outbox);
    };
    if snap.virtual_pos != meeting {
        // Shoved or rebuilt: get back in position first.
        state.phase = BuilderPhase::MasterMoving;
        return master_moving(config, snap, state, outbox);
    }

    if next >= ctx.plan.len() {
        // Everything connected; we already stand on goal terrain, so submit
        // immediately.
        outbox.push(Envelope {
            from: snap.name.clone(),
            to: operator_name(snap.team),
            body: Message::TaskSubmitted {
                task: ctx.task.clone(),
            },
        });
        for (agent, _) in &ctx.roster {
            if agent != &snap.name {
                outbox.push(Envelope {
                    from: snap.name.clone(),
                    to: agent.clone(),
                    body: Message::TaskSubmitted {
                        task: ctx.task.clone(),
                    },
                });
            }
        }
        return ActionRequest::Submit {
            task: ctx.task.clone(),
        };
    }

    let req = ctx.plan[next].clone();
    let Some(slave) = ctx.slave_for(&req).map(str::to_string) else {
        return ActionRequest::Skip;
    };

    if let Some(cs) = connect_step {
        if snap.step >= cs {
            // Both sides agreed on this step; keep issuing until it lands.
            return match entity_of_name(config, &slave) {
                Some(partner) => ActionRequest::Connect {
                    partner,
                    offset: connect_anchor(&ctx.plan, next),
                },
                None => ActionRequest::Skip,
            };
        }
        return ActionRequest::Skip;
    }

    if !requested {
        outbox.push(Envelope {
            from: snap.name.clone(),
            to: slave,
            body: Message::DeliverRequest {
                task: ctx.task.clone(),
                dest: meeting + req.offset(),
                master: snap.name.clone(),
            },
        });
        state.phase = BuilderPhase::MasterCollecting {
            next,
            requested: true,
            connect_step: None,
        };
    }
    ActionRequest::Skip
}

/// Master-frame offset of the already-connected cell adjacent to plan[next]:
/// its predecessor in the ordered plan.
fn connect_anchor(plan: &[Requirement], next: usize) -> Vec2 {
    let target = plan[next].offset();
    plan[..next]
        .iter()
        .map(|r| r.offset())
        .find(|o| o.manhattan_to(target) == 1)
        .expect("ordered plans keep every cell adjacent to a predecessor")
}

// ---------------------------------------------------------------------------
// Meeting point
// ---------------------------------------------------------------------------

/// Reachable goal cell with room for the whole plan: every requirement cell
/// must be known-traversable, unknown, or occupied by our own attachment.
/// Ranked by (summed path distance to the needed dispenser types, distance
/// from the master, (y, x)) — close to dispensers first, since that is what
/// delivery times hinge on.
pub fn choose_meeting_point(snap: &AgentSnapshot, plan: &[Requirement]) -> Option<Vec2> {
    let map = &snap.map;
    let needed_types: BTreeSet<BlockType> = plan.iter().map(|r| r.block_type.clone()).collect();
    let own_cells: BTreeSet<Vec2> = snap
        .attach
        .offsets()
        .into_iter()
        .map(|o| snap.virtual_pos + o)
        .collect();

    let mut best: Option<((u32, u32, Vec2), Vec2)> = None;
    for (pos, cell) in map.cells() {
        if !cell.is_goal() {
            continue;
        }
        let master_dist = if *pos == snap.virtual_pos {
            Some(0)
        } else {
            map.shortest_path(snap.virtual_pos, *pos)
                .map(|p| p.len() as u32)
        };
        let Some(master_dist) = master_dist else {
            continue;
        };
        let roomy = plan.iter().all(|r| {
            let c = *pos + r.offset();
            own_cells.contains(&c)
                || match map.cell(c) {
                    None => true,
                    Some(p) => p.traversable(),
                }
        });
        if !roomy {
            continue;
        }
        let mut dispenser_sum = 0u32;
        for ty in &needed_types {
            if let Some(d) = map.find_nearest(*pos, |p| p.has_dispenser(ty)) {
                dispenser_sum += map
                    .shortest_path(*pos, d)
                    .map(|p| p.len() as u32)
                    .unwrap_or_else(|| pos.manhattan_to(d));
            }
        }
        let key = (dispenser_sum, master_dist, *pos);
        if best.as_ref().is_none_or(|(k, _)| key < *k) {
            best = Some((key, *pos));
        }
    }
    best.map(|(_, pos)| pos)
}

// ---------------------------------------------------------------------------
// Movement contingency
// ---------------------------------------------------------------------------

pub enum MoveDecision {
    Go,
    Rotate(Rotation),
    Unmovable,
}

/// Move in `dir` if nothing blocks it, otherwise find a rotation sequence
/// (up to three quarter turns, clockwise tried first) whose end state
/// unblocks the move, and take its first turn.
pub fn move_with_rotation(
    attach: &AttachmentModel,
    raw: &RawPerceptSet,
    dir: Direction,
) -> MoveDecision {
    if !attach.blocked_moves(raw).contains(&dir) {
        return MoveDecision::Go;
    }
    // The percepts keep showing our blocks at their pre-turn cells; the
    // prediction must treat those cells as our own throughout.
    let physical: BTreeSet<Vec2> = attach.offsets();
    let sequences: [&[Rotation]; 3] = [
        &[Rotation::Clockwise],
        &[Rotation::CounterClockwise],
        &[Rotation::Clockwise, Rotation::Clockwise],
    ];
    'seq: for seq in sequences {
        let mut model = attach.clone();
        for r in seq {
            if model.blocked_rotations_with(raw, &physical).contains(r) {
                continue 'seq;
            }
            model = rotated_model(&model, *r);
        }
        if !model.blocked_moves_with(raw, &physical).contains(&dir) {
            return MoveDecision::Rotate(seq[0]);
        }
    }
    MoveDecision::Unmovable
}

fn rotated_model(model: &AttachmentModel, r: Rotation) -> AttachmentModel {
    let mut out = AttachmentModel::new();
    for (o, t) in model.blocks() {
        out.gain(r.rotate(*o), t.clone())
            .expect("rotation is a bijection");
    }
    out
}

enum RotatePlan {
    Already,
    Turn(Rotation),
    Stuck,
}

/// First turn of the shorter feasible rotation sequence bringing `from` onto
/// `to` (both offsets on the same ring around the agent).
fn rotate_toward(
    attach: &AttachmentModel,
    raw: &RawPerceptSet,
    from: Vec2,
    to: Vec2,
) -> RotatePlan {
    if from == to {
        return RotatePlan::Already;
    }
    let turns_cw = {
        let mut v = from;
        let mut n = 0;
        while v != to && n < 4 {
            v = Rotation::Clockwise.rotate(v);
            n += 1;
        }
        n
    };
    if turns_cw >= 4 {
        return RotatePlan::Stuck; // different rings, rotation cannot help
    }
    let order: [Rotation; 2] = if turns_cw <= 2 {
        [Rotation::Clockwise, Rotation::CounterClockwise]
    } else {
        [Rotation::CounterClockwise, Rotation::Clockwise]
    };
    let physical: BTreeSet<Vec2> = attach.offsets();
    'rot: for r in order {
        let steps = if r == Rotation::Clockwise {
            turns_cw
        } else {
            4 - turns_cw
        };
        let mut model = attach.clone();
        for _ in 0..steps {
            if model.blocked_rotations_with(raw, &physical).contains(&r) {
                continue 'rot;
            }
            model = rotated_model(&model, r);
        }
        return RotatePlan::Turn(r);
    }
    RotatePlan::Stuck
}

// ---------------------------------------------------------------------------
// Navigation and exploration
// ---------------------------------------------------------------------------

pub enum NavStep {
    Arrived,
    Step(ActionRequest),
    Stuck,
}

/// A cached navigation path. Following the computed path (instead of
/// replanning every step) keeps agents from flip-flopping between
/// equal-length geodesics; the path is recomputed only when the target
/// changes, the agent strays off it, or immediate percepts contradict it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavState {
    target: Vec2,
    adjacent: bool,
    path: std::collections::VecDeque<Direction>,
    /// Where the agent should be when the next path step is taken.
    expect_pos: Vec2,
}

/// One step toward `target` (or a cell adjacent to it), reusing the cached
/// path while it stays valid.
pub fn navigate(
    snap: &AgentSnapshot,
    target: Vec2,
    adjacent: bool,
    nav: &mut Option<NavState>,
) -> NavStep {
    let arrived = if adjacent {
        snap.virtual_pos.manhattan_to(target) == 1
    } else {
        snap.virtual_pos == target
    };
    if arrived {
        *nav = None;
        return NavStep::Arrived;
    }

    let own = snap.attach.offsets();
    let reusable = nav.as_ref().is_some_and(|n| {
        n.target == target
            && n.adjacent == adjacent
            && n.expect_pos == snap.virtual_pos
            && !n.path.is_empty()
            && !MapModel::path_invalidated(
                n.path.iter().copied().collect::<Vec<_>>().as_slice(),
                &snap.raw,
                &own,
            )
    });
    if !reusable {
        let fresh = if adjacent {
            snap.map.path_adjacent(snap.virtual_pos, target)
        } else {
            snap.map.shortest_path(snap.virtual_pos, target)
        };
        match fresh {
            Some(path) if !path.is_empty() => {
                *nav = Some(NavState {
                    target,
                    adjacent,
                    path: path.into_iter().collect(),
                    expect_pos: snap.virtual_pos,
                });
            }
            Some(_) => {
                *nav = None;
                return NavStep::Arrived;
            }
            None => {
                *nav = None;
                return NavStep::Stuck;
            }
        }
    }

    let state = nav.as_mut().expect("path cached above");
    let dir = *state.path.front().expect("cached paths are non-empty");
    match move_with_rotation(&snap.attach, &snap.raw, dir) {
        MoveDecision::Go => {
            state.path.pop_front();
            state.expect_pos = snap.virtual_pos + dir.delta();
            NavStep::Step(ActionRequest::Move { direction: dir })
        }
        // Turning first; the path resumes from the same cell next step.
        MoveDecision::Rotate(r) => NavStep::Step(ActionRequest::Rotate { rotation: r }),
        MoveDecision::Unmovable => {
            *nav = None;
            NavStep::Stuck
        }
    }
}

/// Default behaviour: walk toward the nearest missing chunk of the map.
pub fn explore_action(config: &SimConfig, snap: &AgentSnapshot) -> ActionRequest {
    let step_dir = match snap.map.explore_direction(snap.virtual_pos, config.chunk_size) {
        ExploreStep::Move(dir) => dir,
        ExploreStep::Enclosed => {
            return unstuck_decide(config, snap).unwrap_or(ActionRequest::Skip);
        }
        // Nothing left to uncover; drift east as the fixed fallback.
        ExploreStep::Saturated => Direction::East,
    };
    match move_with_rotation(&snap.attach, &snap.raw, step_dir) {
        MoveDecision::Go => ActionRequest::Move {
            direction: step_dir,
        },
        MoveDecision::Rotate(r) => ActionRequest::Rotate { rotation: r },
        MoveDecision::Unmovable => ActionRequest::Skip,
    }
}

/// Clear a way out when caged in: flood-fill the local map from the agent;
/// if no route reaches the vision boundary, charge a clear at the wall
/// obstacle with the most free neighbours (ties by (y, x)). Re-derived every
/// step, the target stays stable until the wall actually opens.
pub fn unstuck_decide(config: &SimConfig, snap: &AgentSnapshot) -> Option<ActionRequest> {
    let radius = config.vision_radius;
    let origin = snap.virtual_pos;
    let own: BTreeSet<Vec2> = {
        let mut s = snap.attach.offsets();
        s.insert(Vec2::ZERO);
        s
    };
    let passable = |pos: Vec2| {
        own.contains(&(pos - origin)) || snap.map.cell(pos).is_some_and(MapPercept::traversable)
    };

    let mut region = BTreeSet::from([origin]);
    let mut queue = vec![origin];
    while let Some(pos) = queue.pop() {
        if pos.manhattan_to(origin) >= radius {
            // A path reaches the edge of vision: not caged.
            return None;
        }
        for n in pos.neighbours() {
            if !region.contains(&n) && passable(n) {
                region.insert(n);
                queue.push(n);
            }
        }
    }

    // Caged: pick the obstacle bordering the region that opens the most.
    let mut candidates: Vec<(Vec2, usize)> = Vec::new();
    for pos in &region {
        for n in pos.neighbours() {
            if region.contains(&n) || candidates.iter().any(|(c, _)| *c == n) {
                continue;
            }
            let is_obstacle = snap
                .map
                .cell(n)
                .is_some_and(|c| c.terrain == Terrain::Obstacle);
            if !is_obstacle {
                continue;
            }
            let free = n
                .neighbours()
                .into_iter()
                .filter(|f| {
                    snap.map
                        .cell(*f)
                        .is_some_and(|c| c.terrain != Terrain::Obstacle && c.things.is_empty())
                })
                .count();
            candidates.push((n, free));
        }
    }
    let target = candidates
        .into_iter()
        .max_by(|(ca, fa), (cb, fb)| fa.cmp(fb).then(cb.cmp(ca)))?
        .0;
    Some(ActionRequest::Clear {
        offset: target - origin,
    })
}

// ---------------------------------------------------------------------------
// Attacker
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackerState {
    /// Virtual cell of the block currently being charged at.
    pub strike_target: Option<Vec2>,
    nav: Option<NavState>,
}

pub fn attacker_decide(
    config: &SimConfig,
    snap: &AgentSnapshot,
    state: &mut AttackerState,
) -> ActionRequest {
    if let Some(action) = unstuck_decide(config, snap) {
        return action;
    }
    let my_team = team_name(snap.team);

    // Keep charging the held target while it is still worth hitting.
    if let Some(target) = state.strike_target {
        let rel = target - snap.virtual_pos;
        if rel.manhattan() <= config.vision_radius && strike_valid(snap, rel, &my_team) {
            return ActionRequest::Clear { offset: rel };
        }
        state.strike_target = None;
    }

    // Look for an opposing agent on goal terrain with an attached block.
    if let Some(rel) = find_strike(config, snap, &my_team) {
        state.strike_target = Some(snap.virtual_pos + rel);
        return ActionRequest::Clear { offset: rel };
    }

    // Monitor the nearest known goal cluster, exploring until one is known.
    let near_goal = snap
        .map
        .cells()
        .any(|(p, c)| c.is_goal() && p.manhattan_to(snap.virtual_pos) <= 2);
    if near_goal {
        return ActionRequest::Skip;
    }
    if let Some(goal) = snap.map.find_nearest(snap.virtual_pos, MapPercept::is_goal) {
        return match navigate(snap, goal, true, &mut state.nav) {
            NavStep::Arrived => ActionRequest::Skip,
            NavStep::Step(action) => action,
            NavStep::Stuck => explore_action(config, snap),
        };
    }
    explore_action(config, snap)
}

/// The held target still has a carried block adjacent to an on-goal enemy.
fn strike_valid(snap: &AgentSnapshot, rel: Vec2, my_team: &str) -> bool {
    let flagged_block = snap
        .raw
        .things_at(rel)
        .any(|t| matches!(t.kind, ThingKind::Block { .. }))
        && snap.raw.is_attached(rel);
    if !flagged_block {
        return false;
    }
    rel.neighbours()
        .into_iter()
        .any(|e_rel| enemy_on_goal(snap, e_rel, my_team))
}

fn enemy_on_goal(snap: &AgentSnapshot, rel: Vec2, my_team: &str) -> bool {
    snap.raw
        .things_at(rel)
        .any(|t| matches!(&t.kind, ThingKind::Entity { team } if team != my_team))
        && snap.raw.terrain_at(rel) == Some(Terrain::Goal)
}

/// Relative cell of a block to strike: carried, adjacent to an on-goal
/// enemy, and not adjacent to any of our own agents (flags are ownerless,
/// so that is the best friendly-fire guard available).
fn find_strike(config: &SimConfig, snap: &AgentSnapshot, my_team: &str) -> Option<Vec2> {
    let mut enemies: Vec<Vec2> = snap
        .raw
        .things
        .iter()
        .filter(|t| matches!(&t.kind, ThingKind::Entity { team } if team != my_team))
        .map(|t| t.rel)
        .filter(|rel| snap.raw.terrain_at(*rel) == Some(Terrain::Goal))
        .collect();
    enemies.sort();
    for enemy in enemies {
        let mut blocks: Vec<Vec2> = enemy
            .neighbours()
            .into_iter()
            .filter(|b| b.manhattan() <= config.vision_radius)
            .filter(|b| {
                snap.raw
                    .things_at(*b)
                    .any(|t| matches!(t.kind, ThingKind::Block { .. }))
                    && snap.raw.is_attached(*b)
            })
            .filter(|b| {
                !b.neighbours().into_iter().any(|n| {
                    snap.raw
                        .things_at(n)
                        .any(|t| matches!(&t.kind, ThingKind::Entity { team } if team == my_team))
                })
            })
            .collect();
        blocks.sort();
        if let Some(b) = blocks.first() {
            return Some(*b);
        }
    }
    None
}
