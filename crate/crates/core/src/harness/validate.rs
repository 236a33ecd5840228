//! Replay-fidelity check: re-simulate the recorded actions through a fresh
//! engine and a fresh ingestion pipeline and compare every derived field,
//! step by step. Nothing agent-side is taken on faith: identifications are
//! recomputed from percepts, and attachment gains are only accepted when the
//! replayed engine shows a matching successful connect.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{agent_name, entity_of_name, SimConfig, TeamStrategy};
use crate::geom::Vec2;
use crate::pipeline::Pipeline;
use crate::sim::{compute_percepts, ActionEffect, BlockType};

use super::run::{apply_identifications, compute_identifications, sync_team_maps};
use super::trace::{ReplayTrace, TraceError};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub steps_checked: u64,
    pub mismatches: Vec<String>,
}

const MAX_MISMATCHES: usize = 32;

impl ValidationReport {
    fn note(&mut self, msg: String) {
        self.ok = false;
        if self.mismatches.len() < MAX_MISMATCHES {
            self.mismatches.push(msg);
        }
    }
}

pub fn validate(trace: &ReplayTrace) -> Result<ValidationReport, TraceError> {
    let config = &trace.header.config;
    let mut report = ValidationReport {
        ok: true,
        steps_checked: 0,
        mismatches: Vec::new(),
    };

    let mut world = trace.header.world.clone();
    let pipeline = fresh_pipeline(config);
    // (offset, type) gains each agent may legitimately pick up this step,
    // harvested from the previous step's successful connects.
    let mut allowed_gains: BTreeMap<String, Vec<(Vec2, BlockType)>> = BTreeMap::new();

    for record in &trace.records {
        let step = record.step;

        // Percepts are a pure function of the world.
        for (name, recorded) in &record.percepts {
            let entity = entity_of_name(config, name)
                .ok_or_else(|| TraceError::Malformed(format!("unknown agent {name}")))?;
            let fresh = compute_percepts(&world, entity);
            if &fresh != recorded {
                report.note(format!("step {step}: percepts diverge for {name}"));
            }
        }

        // Ingest and redo the operator's identification work.
        pipeline.poll_and_update(record.percepts.clone());
        for team in 0..config.teams {
            if config.strategy_of(team) != TeamStrategy::Full {
                continue;
            }
            let team_agents: Vec<String> = (0..config.entities_per_team)
                .map(|slot| agent_name(team, slot))
                .collect();
            let fresh = compute_identifications(&pipeline, config, team, step, &record.percepts);
            let recorded: Vec<_> = record
                .identifications
                .iter()
                .filter(|i| team_agents.contains(&i.a))
                .cloned()
                .collect();
            if fresh != recorded {
                report.note(format!(
                    "step {step}: identifications diverge for team {team}"
                ));
            }
            apply_identifications(&pipeline, &fresh);
            sync_team_maps(&pipeline, &team_agents, step, &fresh);
        }

        // Agent containers: virtual positions and attachment models are pure
        // functions of percepts plus engine-verified connect gains.
        for (name, recorded) in &record.agents {
            if entity_of_name(config, name).is_none() {
                report.note(format!("step {step}: unknown agent record {name}"));
                continue;
            }
            let snap = pipeline
                .get_container(name, step)
                .map_err(|e| TraceError::Malformed(e.to_string()))?;
            if snap.virtual_pos != recorded.virtual_pos {
                report.note(format!("step {step}: virtual position diverges for {name}"));
            }
            let mut model: Vec<(Vec2, BlockType)> = snap
                .attach
                .blocks()
                .iter()
                .map(|(o, t)| (*o, t.clone()))
                .collect();
            // Adopt recorded extras only when a successful connect backs them.
            let allowed = allowed_gains.remove(name).unwrap_or_default();
            let extras: Vec<(Vec2, BlockType)> = recorded
                .attachments
                .iter()
                .filter(|a| !model.contains(a))
                .cloned()
                .collect();
            for extra in extras {
                if allowed.contains(&extra) {
                    pipeline.attach_gain(name, extra.0, extra.1.clone());
                    model.push(extra);
                } else {
                    report.note(format!(
                        "step {step}: unexplained attachment {:?} for {name}",
                        extra.0
                    ));
                }
            }
            model.sort();
            let mut recorded_attachments = recorded.attachments.clone();
            recorded_attachments.sort();
            if model != recorded_attachments {
                report.note(format!("step {step}: attachment model diverges for {name}"));
            }
            let identified: Vec<String> = snap.identified.keys().cloned().collect();
            if identified != recorded.identified {
                report.note(format!("step {step}: identified set diverges for {name}"));
            }
        }

        // Resolve the step and compare every engine-derived outcome.
        let actions = trace.actions_for_engine(record)?;
        let outcome = world
            .apply_step(&actions)
            .map_err(|e| TraceError::Malformed(format!("step {step}: {e}")))?;
        for (entity, fresh) in outcome.actions.iter().enumerate() {
            let name = super::render::name_of_entity(trace, entity);
            match record.actions.get(&name) {
                Some(recorded) if recorded == fresh => {}
                Some(_) => report.note(format!("step {step}: action outcome diverges for {name}")),
                None => report.note(format!("step {step}: missing action for {name}")),
            }
        }
        if outcome.events != record.events {
            report.note(format!("step {step}: clear events diverge"));
        }

        for (name, recorded) in &record.entities {
            let entity = entity_of_name(config, name)
                .ok_or_else(|| TraceError::Malformed(format!("unknown agent {name}")))?;
            let e = &world.entities[entity];
            let fresh = super::trace::EntityRecord {
                team: crate::config::team_name(e.team),
                pos: e.pos,
                energy: e.energy,
                disabled: e.is_disabled(world.step),
                attached_blocks: world.component_of(entity),
            };
            if &fresh != recorded {
                report.note(format!("step {step}: entity state diverges for {name}"));
            }
        }

        for (team_label, recorded) in &record.scores {
            let team = team_label.chars().next().map(|c| c as u32 - 'A' as u32);
            match team {
                Some(t) if (t as usize) < world.scores.len() => {
                    if world.scores[t as usize] != *recorded {
                        report.note(format!("step {step}: score diverges for {team_label}"));
                    }
                }
                _ => report.note(format!("step {step}: unknown team {team_label}")),
            }
        }

        // Gains permitted next step: blocks welded on by this step's
        // successful connects, located through the replayed engine.
        allowed_gains.clear();
        for (entity, rec) in outcome.actions.iter().enumerate() {
            if let Some(ActionEffect::Connected { partner_block, .. }) = &rec.effect {
                let name = super::render::name_of_entity(trace, entity);
                let gain = world
                    .block(*partner_block)
                    .map(|b| (b.pos - world.entities[entity].pos, b.block_type.clone()));
                if let Some(gain) = gain {
                    allowed_gains.entry(name).or_default().push(gain);
                }
            }
        }

        report.steps_checked += 1;
    }

    Ok(report)
}

fn fresh_pipeline(config: &SimConfig) -> Pipeline {
    let mut agents = Vec::new();
    for team in 0..config.teams {
        for slot in 0..config.entities_per_team {
            agents.push((
                agent_name(team, slot),
                crate::config::entity_id(config, team, slot),
                team,
                config.role_of(slot),
            ));
        }
    }
    Pipeline::new(agents)
}
