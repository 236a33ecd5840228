//! Headless match execution: lockstep loop over percepts, ingestion,
//! operator coordination, agent decides and engine resolution, appending
//! one trace record per step.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::behavior::{
    attacker_decide, builder_decide, AttackerState, BuilderState, Envelope, Message,
};
use crate::config::{
    agent_name, entity_of_name, operator_name, team_name, team_slot, Role, SimConfig,
    TeamStrategy,
};
use crate::geom::Vec2;
use crate::identify::{compute_translation, pair_reports, SightingReport};
use crate::map::MapPercept;
use crate::pipeline::Pipeline;
use crate::plan::{assign_tasks, form_subteams, monitor_assignments, plan_requirements, TaskAssignment};
use crate::sim::{
    generate_world, ActionEffect, ActionRequest, EngineError, RawPerceptSet, Requirement,
    ThingKind, WorldState,
};

use super::trace::{
    AgentRecord, EntityRecord, IdentificationRecord, ReplayTrace, StepRecord, TaskEvent,
};

/// How one team's entities are driven.
pub enum TeamController {
    Full(TeamAi),
    Idle,
    /// Per-entity action queues; exhausted queues skip.
    Scripted(BTreeMap<usize, VecDeque<ActionRequest>>),
}

#[derive(Default)]
pub struct OperatorState {
    pub assignments: Vec<TaskAssignment>,
}

pub struct TeamAi {
    pub operator: OperatorState,
    pub builders: BTreeMap<String, BuilderState>,
    pub attackers: BTreeMap<String, AttackerState>,
}

impl TeamAi {
    pub fn new(config: &SimConfig, team: u32) -> Self {
        let mut builders = BTreeMap::new();
        let mut attackers = BTreeMap::new();
        for slot in 0..config.entities_per_team {
            let name = agent_name(team, slot);
            match config.role_of(slot) {
                Role::Builder => {
                    builders.insert(name, BuilderState::new());
                }
                Role::Attacker => {
                    attackers.insert(name, AttackerState::default());
                }
            }
        }
        TeamAi {
            operator: OperatorState::default(),
            builders,
            attackers,
        }
    }
}

pub struct MatchRunner {
    config: SimConfig,
    world: WorldState,
    pipeline: Pipeline,
    controllers: Vec<TeamController>,
    /// Messages sent last step, pending delivery this step.
    pending: Vec<Envelope>,
    trace: ReplayTrace,
}

impl MatchRunner {
    pub fn from_config(config: &SimConfig) -> Result<Self, EngineError> {
        let world = generate_world(config)?;
        let controllers = (0..config.teams)
            .map(|t| match config.strategy_of(t) {
                TeamStrategy::Full => TeamController::Full(TeamAi::new(config, t)),
                TeamStrategy::Idle => TeamController::Idle,
            })
            .collect();
        Ok(Self::new(config.clone(), world, controllers))
    }

    /// Assemble a runner around a prebuilt world and explicit controllers;
    /// scripted scenarios and tests enter here.
    pub fn new(config: SimConfig, world: WorldState, controllers: Vec<TeamController>) -> Self {
        let agents = (0..config.teams).flat_map(|team| {
            let config = &config;
            (0..config.entities_per_team).map(move |slot| {
                (
                    agent_name(team, slot),
                    crate::config::entity_id(config, team, slot),
                    team,
                    config.role_of(slot),
                )
            })
        });
        let pipeline = Pipeline::new(agents.collect::<Vec<_>>());
        MatchRunner {
            trace: ReplayTrace::new(config.clone(), &world),
            config,
            world,
            pipeline,
            controllers,
            pending: Vec::new(),
        }
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn trace(&self) -> &ReplayTrace {
        &self.trace
    }

    pub fn into_trace(self) -> ReplayTrace {
        self.trace
    }

    /// Run to `max_steps`, returning the finished trace.
    pub fn run(mut self) -> Result<ReplayTrace, EngineError> {
        for _ in 0..self.config.max_steps {
            self.step_once()?;
        }
        Ok(self.trace)
    }

    /// Execute one lockstep step.
    pub fn step_once(&mut self) -> Result<(), EngineError> {
        let step = self.world.step;
        let names = self.agent_names();

        // Percepts and ingestion.
        let mut percepts: BTreeMap<String, RawPerceptSet> = BTreeMap::new();
        for name in &names {
            let entity = entity_of_name(&self.config, name).expect("roster name");
            percepts.insert(name.clone(), crate::sim::compute_percepts(&self.world, entity));
        }
        self.pipeline.poll_and_update(percepts.clone());

        // Deliver last step's messages.
        let mut inboxes: BTreeMap<String, Vec<Envelope>> = BTreeMap::new();
        let mut delivered = std::mem::take(&mut self.pending);
        delivered.sort();
        for env in delivered {
            inboxes.entry(env.to.clone()).or_default().push(env);
        }

        // Operator phase per full team: identification, map sync, tasks.
        let mut identifications = Vec::new();
        let mut task_events = Vec::new();
        let mut outbox_all: Vec<Envelope> = Vec::new();
        for team in 0..self.config.teams {
            if !matches!(self.controllers[team as usize], TeamController::Full(_)) {
                continue;
            }
            let new_pairs = self.identify_team(team, step, &percepts);
            sync_team_maps(&self.pipeline, &self.team_agents(team), step, &new_pairs);
            identifications.extend(new_pairs);

            let operator_inbox = inboxes
                .remove(&operator_name(team))
                .unwrap_or_default();
            let TeamController::Full(ai) = &mut self.controllers[team as usize] else {
                unreachable!()
            };
            let (events, messages) = operator_phase(
                &self.config,
                team,
                step,
                &mut ai.operator,
                &percepts,
                &self.pipeline,
                &operator_inbox,
            );
            task_events.extend(events);
            outbox_all.extend(messages);
        }

        // Agent decides.
        let mut actions: Vec<ActionRequest> =
            vec![ActionRequest::Skip; self.config.total_entities()];
        for team in 0..self.config.teams {
            match &mut self.controllers[team as usize] {
                TeamController::Idle => {}
                TeamController::Scripted(scripts) => {
                    for slot in 0..self.config.entities_per_team {
                        let entity = crate::config::entity_id(&self.config, team, slot);
                        if let Some(queue) = scripts.get_mut(&entity) {
                            if let Some(action) = queue.pop_front() {
                                actions[entity] = action;
                            }
                        }
                    }
                }
                TeamController::Full(ai) => {
                    for slot in 0..self.config.entities_per_team {
                        let name = agent_name(team, slot);
                        let entity = crate::config::entity_id(&self.config, team, slot);
                        let snap = self
                            .pipeline
                            .get_container(&name, step)
                            .expect("roster agent");
                        let inbox = inboxes.remove(&name).unwrap_or_default();
                        let action = if let Some(state) = ai.builders.get_mut(&name) {
                            let decision = builder_decide(&self.config, &snap, state, &inbox);
                            if let Some((offset, ty)) = decision.gained {
                                self.pipeline.attach_gain(&name, offset, ty);
                            }
                            outbox_all.extend(decision.outbox);
                            decision.action
                        } else if let Some(state) = ai.attackers.get_mut(&name) {
                            attacker_decide(&self.config, &snap, state)
                        } else {
                            ActionRequest::Skip
                        };
                        actions[entity] = action;
                    }
                }
            }
        }

        // Resolve the step.
        let outcome = self.world.apply_step(&actions)?;

        // Trace record.
        let mut action_records = BTreeMap::new();
        for (entity, rec) in outcome.actions.iter().enumerate() {
            let (team, slot) = team_slot(&self.config, entity);
            action_records.insert(agent_name(team, slot), rec.clone());
            if let Some(ActionEffect::Submitted {
                task,
                reward,
                consumed,
            }) = &rec.effect
            {
                task_events.push(TaskEvent::Submitted {
                    task: task.clone(),
                    team: team_name(team),
                    by: agent_name(team, slot),
                    reward: *reward,
                    consumed: consumed.clone(),
                });
            }
        }
        for task in &outcome.new_tasks {
            task_events.push(TaskEvent::Created { task: task.clone() });
        }

        let mut agents = BTreeMap::new();
        for name in &names {
            let snap = self.pipeline.get_container(name, step).expect("roster agent");
            agents.insert(
                name.clone(),
                AgentRecord {
                    entity: snap.entity,
                    virtual_pos: snap.virtual_pos,
                    attachments: snap
                        .attach
                        .blocks()
                        .iter()
                        .map(|(o, t)| (*o, t.clone()))
                        .collect(),
                    identified: snap.identified.keys().cloned().collect(),
                },
            );
        }

        let mut entities = BTreeMap::new();
        for e in &self.world.entities {
            let (team, slot) = team_slot(&self.config, e.id);
            entities.insert(
                agent_name(team, slot),
                EntityRecord {
                    team: team_name(team),
                    pos: e.pos,
                    energy: e.energy,
                    disabled: e.is_disabled(self.world.step),
                    attached_blocks: self.world.component_of(e.id),
                },
            );
        }

        let scores = (0..self.config.teams)
            .map(|t| (team_name(t), self.world.scores[t as usize]))
            .collect();

        outbox_all.sort();
        self.trace.records.push(StepRecord {
            step,
            percepts,
            agents,
            identifications,
            messages: outbox_all.clone(),
            task_events,
            actions: action_records,
            events: outcome.events,
            entities,
            scores,
        });
        self.pending = outbox_all;
        Ok(())
    }

    fn agent_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for team in 0..self.config.teams {
            for slot in 0..self.config.entities_per_team {
                names.push(agent_name(team, slot));
            }
        }
        names
    }

    fn team_agents(&self, team: u32) -> Vec<String> {
        (0..self.config.entities_per_team)
            .map(|slot| agent_name(team, slot))
            .collect()
    }

    /// Operator identification: gather mutual-sighting broadcasts, pair
    /// them, skip already-identified pairs, record the rest permanently.
    fn identify_team(
        &mut self,
        team: u32,
        step: u64,
        percepts: &BTreeMap<String, RawPerceptSet>,
    ) -> Vec<IdentificationRecord> {
        let records = compute_identifications(&self.pipeline, &self.config, team, step, percepts);
        apply_identifications(&self.pipeline, &records);
        records
    }
}

/// The operator's identification pass for one team, as a pure function of
/// the current containers and percepts; replay validation recomputes it.
pub fn compute_identifications(
    pipeline: &Pipeline,
    config: &SimConfig,
    team: u32,
    step: u64,
    percepts: &BTreeMap<String, RawPerceptSet>,
) -> Vec<IdentificationRecord> {
    let my_team = team_name(team);
    let mut reports = Vec::new();
    for slot in 0..config.entities_per_team {
        let name = agent_name(team, slot);
        let raw = &percepts[&name];
        for thing in &raw.things {
            if thing.rel == Vec2::ZERO {
                continue;
            }
            if matches!(&thing.kind, ThingKind::Entity { team: t } if t == &my_team) {
                reports.push(SightingReport {
                    reporter: name.clone(),
                    step,
                    offset: thing.rel,
                });
            }
        }
    }
    let mut records = Vec::new();
    for pair in pair_reports(&reports) {
        let snap_a = pipeline.get_container(&pair.a, step).expect("agent");
        if snap_a.identified.contains_key(&pair.b) {
            continue; // identified for the remainder of the match
        }
        let snap_b = pipeline.get_container(&pair.b, step).expect("agent");
        let b_to_a = compute_translation(snap_a.virtual_pos, pair.a_offset, snap_b.virtual_pos);
        records.push(IdentificationRecord {
            a: pair.a.clone(),
            b: pair.b.clone(),
            translation: b_to_a.delta,
        });
    }
    records
}

/// Record confirmed pairs on both containers, in both directions.
pub fn apply_identifications(pipeline: &Pipeline, records: &[IdentificationRecord]) {
    for ident in records {
        let t = crate::identify::Translation::new(ident.translation);
        pipeline.record_identification(&ident.a, &ident.b, t);
        pipeline.record_identification(&ident.b, &ident.a, t.inverse());
    }
}

/// Map synchronization for one team and step: freshly identified pairs swap
/// whole maps, then every identified pair exchanges the cells seen this
/// step. All merges read from snapshots taken up front, so ordering cannot
/// leak into the result.
pub fn sync_team_maps(
    pipeline: &Pipeline,
    team_agents: &[String],
    step: u64,
    new_pairs: &[IdentificationRecord],
) {
    if !new_pairs.is_empty() {
        let mut full: BTreeMap<&str, Vec<MapPercept>> = BTreeMap::new();
        for pair in new_pairs {
            for name in [&pair.a, &pair.b] {
                full.entry(name.as_str())
                    .or_insert_with(|| pipeline.map_cells(name));
            }
        }
        for pair in new_pairs {
            pipeline.merge_into(&pair.a, &pair.b, &full[pair.b.as_str()]);
            pipeline.merge_into(&pair.b, &pair.a, &full[pair.a.as_str()]);
        }
    }

    // Incremental push of this step's cells to every identified peer.
    let fresh: BTreeMap<&str, Vec<MapPercept>> = team_agents
        .iter()
        .map(|n| (n.as_str(), pipeline.map_cells_seen_at(n, step)))
        .collect();
    for name in team_agents {
        let peers: Vec<String> = pipeline
            .get_container(name, step)
            .map(|s| s.identified.keys().cloned().collect())
            .unwrap_or_default();
        for peer in peers {
            if team_agents.contains(&peer) {
                pipeline.merge_into(&peer, name, &fresh[name.as_str()]);
            }
        }
    }
}

/// Operator task housekeeping: react to submissions, cancel dead
/// assignments, form sub-teams and hand out new tasks.
#[allow(clippy::too_many_arguments)]
fn operator_phase(
    config: &SimConfig,
    team: u32,
    step: u64,
    operator: &mut OperatorState,
    percepts: &BTreeMap<String, RawPerceptSet>,
    pipeline: &Pipeline,
    inbox: &[Envelope],
) -> (Vec<TaskEvent>, Vec<Envelope>) {
    let mut events = Vec::new();
    let mut outbox = Vec::new();
    let op_name = operator_name(team);
    let team_label = team_name(team);

    // Masters report successful submissions; drop those assignments at once.
    for env in inbox {
        if let Message::TaskSubmitted { task } = &env.body {
            operator.assignments.retain(|a| &a.task != task);
        }
    }

    // The task list is whatever the team perceives; all agents see the same.
    let first_agent = agent_name(team, 0);
    let tasks = percepts[&first_agent].tasks.clone();

    let (kept, cancelled) = monitor_assignments(&operator.assignments, &tasks, step);
    if !cancelled.is_empty() {
        let mut by_task: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for a in &cancelled {
            by_task.entry(a.task.clone()).or_default().push(a.agent.clone());
        }
        for (task, agents) in by_task {
            for agent in &agents {
                outbox.push(Envelope {
                    from: op_name.clone(),
                    to: agent.clone(),
                    body: Message::Cancel { task: task.clone() },
                });
            }
            events.push(TaskEvent::Cancelled {
                task,
                team: team_label.clone(),
                agents,
            });
        }
    }
    operator.assignments = kept;

    // Free builders: anyone without a live assignment.
    let assigned: BTreeSet<&str> = operator
        .assignments
        .iter()
        .map(|a| a.agent.as_str())
        .collect();
    let mut free: Vec<String> = Vec::new();
    let mut identified: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for slot in 0..config.entities_per_team {
        if config.role_of(slot) != Role::Builder {
            continue;
        }
        let name = agent_name(team, slot);
        let snap = pipeline.get_container(&name, step).expect("agent");
        identified.insert(name.clone(), snap.identified.keys().cloned().collect());
        if !assigned.contains(name.as_str()) {
            free.push(name);
        }
    }

    let subteams = form_subteams(&free, &identified);
    let excluded: BTreeSet<String> = operator
        .assignments
        .iter()
        .map(|a| a.task.clone())
        .collect();
    let new_assignments = assign_tasks(&subteams, &tasks, step, config.min_slack, &excluded);

    let mut by_task: BTreeMap<String, Vec<TaskAssignment>> = BTreeMap::new();
    for a in &new_assignments {
        by_task.entry(a.task.clone()).or_default().push(a.clone());
    }
    for (task_name, group) in by_task {
        let task = tasks.iter().find(|t| t.name == task_name).expect("assigned task");
        let plan = plan_requirements(&task.requirements).expect("assigned tasks are plannable");
        let roster: Vec<(String, Requirement)> = plan
            .iter()
            .map(|req| {
                let owner = group
                    .iter()
                    .find(|a| &a.req == req)
                    .expect("plan requirement assigned")
                    .agent
                    .clone();
                (owner, req.clone())
            })
            .collect();
        for a in &group {
            outbox.push(Envelope {
                from: op_name.clone(),
                to: a.agent.clone(),
                body: Message::Assign {
                    task: task_name.clone(),
                    deadline: task.deadline,
                    req: a.req.clone(),
                    plan: plan.clone(),
                    roster: roster.clone(),
                },
            });
        }
        events.push(TaskEvent::Assigned {
            task: task_name,
            team: team_label.clone(),
            agents: group.iter().map(|a| a.agent.clone()).collect(),
        });
    }
    operator.assignments.extend(new_assignments);

    (events, outbox)
}
