//! Deterministic reconstruction of world and agent state from a trace.
//!
//! The engine and the ingestion pipeline are pure functions of the recorded
//! inputs, so both can be replayed: the world from the config plus recorded
//! actions, the agent maps from recorded percepts plus recorded
//! identifications (using the exact sync rules of the runner).

use std::collections::BTreeMap;

use crate::map::MapModel;
use crate::pipeline::Pipeline;
use crate::sim::WorldState;

use super::run::sync_team_maps;
use super::trace::{ReplayTrace, TraceError};

/// World state at the beginning of `step` (after `step` applied steps).
pub fn rebuild_world(trace: &ReplayTrace, step: u64) -> Result<WorldState, TraceError> {
    let mut world = trace.header.world.clone();
    for record in trace.records.iter().take(step as usize) {
        let actions = trace.actions_for_engine(record)?;
        world
            .apply_step(&actions)
            .map_err(|e| TraceError::Malformed(format!("step {}: {e}", record.step)))?;
    }
    Ok(world)
}

/// Agent map models after ingesting and synchronizing step `step` (or the
/// last recorded step, if `step` equals the record count).
pub fn rebuild_agent_maps(
    trace: &ReplayTrace,
    step: u64,
) -> Result<BTreeMap<String, MapModel>, TraceError> {
    let pipeline = rebuild_pipeline(trace, step)?;
    let mut maps = BTreeMap::new();
    for name in pipeline.agent_names() {
        let mut model = MapModel::new();
        // `map_cells` clones the percept list; rebuild a model from it.
        let cells = pipeline.map_cells(&name);
        model.merge_remote(&cells, crate::geom::Vec2::ZERO);
        maps.insert(name, model);
    }
    Ok(maps)
}

/// Replay the pipeline (ingestion + identification sync) through `upto`
/// steps inclusive-exclusive: records `0..upto` are ingested; `upto` may be
/// at most the record count.
pub fn rebuild_pipeline(trace: &ReplayTrace, upto: u64) -> Result<Pipeline, TraceError> {
    let config = &trace.header.config;
    let agents: Vec<(String, usize, u32, crate::config::Role)> = {
        let mut v = Vec::new();
        for team in 0..config.teams {
            for slot in 0..config.entities_per_team {
                v.push((
                    crate::config::agent_name(team, slot),
                    crate::config::entity_id(config, team, slot),
                    team,
                    config.role_of(slot),
                ));
            }
        }
        v
    };
    let pipeline = Pipeline::new(agents);

    for record in trace.records.iter().take(upto as usize) {
        pipeline.poll_and_update(record.percepts.clone());
        // Apply the recorded identifications with the runner's sync rules,
        // team by team in team order.
        for team in 0..config.teams {
            let team_agents: Vec<String> = (0..config.entities_per_team)
                .map(|slot| crate::config::agent_name(team, slot))
                .collect();
            let new_pairs: Vec<_> = record
                .identifications
                .iter()
                .filter(|i| team_agents.contains(&i.a))
                .cloned()
                .collect();
            for ident in &new_pairs {
                let t = crate::identify::Translation::new(ident.translation);
                pipeline.record_identification(&ident.a, &ident.b, t);
                pipeline.record_identification(&ident.b, &ident.a, t.inverse());
            }
            let any_identified = team_agents.iter().any(|n| {
                pipeline
                    .get_container(n, record.step)
                    .map(|s| !s.identified.is_empty())
                    .unwrap_or(false)
            });
            if !new_pairs.is_empty() || any_identified {
                sync_team_maps(&pipeline, &team_agents, record.step, &new_pairs);
            }
        }
    }
    Ok(pipeline)
}
