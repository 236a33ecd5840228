//! Text rendering of trace frames: the ground-truth grid, or one agent's
//! map knowledge, at any recorded step.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::{entity_of_name, team_name, team_slot};
use crate::geom::Vec2;
use crate::map::{MapModel, MapPercept, MapThing};
use crate::sim::{Terrain, WorldState};

use super::rebuild::{rebuild_agent_maps, rebuild_world};
use super::trace::ReplayTrace;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("step {step} out of range (trace has {max} steps)")]
    StepOutOfRange { step: u64, max: u64 },
    #[error("unknown agent {0}")]
    UnknownAgent(String),
    #[error(transparent)]
    Engine(#[from] crate::sim::EngineError),
    #[error(transparent)]
    Trace(#[from] super::trace::TraceError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RenderView {
    Global,
    Agent(String),
}

const LEGEND: &str =
    "legend: A/B.. agent  # obstacle  * goal  D dispenser  b block  . empty  ? unknown";

/// Render the world (or an agent's map) as it stood at the beginning of
/// `step`. Step may equal the record count to show the final state.
pub fn render(trace: &ReplayTrace, step: u64, view: &RenderView) -> Result<String, RenderError> {
    let max = trace.records.len() as u64;
    if step > max {
        return Err(RenderError::StepOutOfRange { step, max });
    }
    match view {
        RenderView::Global => render_global(trace, step),
        RenderView::Agent(name) => render_agent(trace, step, name),
    }
}

fn render_global(trace: &ReplayTrace, step: u64) -> Result<String, RenderError> {
    let world = rebuild_world(trace, step)?;
    let config = &trace.header.config;

    let mut out = banner(trace, step);
    for y in 0..world.height as i32 {
        for x in 0..world.width as i32 {
            let pos = Vec2::new(x, y);
            out.push(global_glyph(&world, pos));
        }
        out.push('\n');
    }
    out.push_str(LEGEND);
    out.push('\n');
    let _ = config;
    Ok(out)
}

fn global_glyph(world: &WorldState, pos: Vec2) -> char {
    if let Some(e) = world.entity_at(pos) {
        return team_letter(e.team);
    }
    if world.block_at(pos).is_some() {
        return 'b';
    }
    if world.dispenser_at(pos).is_some() {
        return 'D';
    }
    match world.terrain_at(pos) {
        Terrain::Obstacle => '#',
        Terrain::Goal => '*',
        Terrain::Empty => '.',
    }
}

fn team_letter(team: u32) -> char {
    team_name(team).chars().next().unwrap_or('A')
}

fn render_agent(trace: &ReplayTrace, step: u64, name: &str) -> Result<String, RenderError> {
    let config = &trace.header.config;
    if entity_of_name(config, name).is_none() {
        return Err(RenderError::UnknownAgent(name.to_string()));
    }
    let maps = rebuild_agent_maps(trace, step)?;
    let map = maps
        .get(name)
        .ok_or_else(|| RenderError::UnknownAgent(name.to_string()))?;

    let mut out = banner(trace, step);
    out.push_str(&format!("agent {name} map ({} cells known)\n", map.len()));

    // Identified teammates as of this step.
    let mut identified: Vec<String> = Vec::new();
    for record in trace.records.iter().take(step as usize) {
        for ident in &record.identifications {
            if ident.a == name {
                identified.push(ident.b.clone());
            } else if ident.b == name {
                identified.push(ident.a.clone());
            }
        }
    }
    identified.sort();
    if identified.is_empty() {
        out.push_str("identified: (none)\n");
    } else {
        out.push_str(&format!("identified: {}\n", identified.join(", ")));
    }

    out.push_str(&frame_of_map(map));
    out.push_str(LEGEND);
    out.push('\n');
    Ok(out)
}

/// Character frame of a map model over its known bounding box.
pub fn frame_of_map(map: &MapModel) -> String {
    let cells: BTreeMap<Vec2, &MapPercept> = map.cells().map(|(p, c)| (*p, c)).collect();
    if cells.is_empty() {
        return String::from("(nothing known)\n");
    }
    let min_x = cells.keys().map(|p| p.x).min().unwrap();
    let max_x = cells.keys().map(|p| p.x).max().unwrap();
    let min_y = cells.keys().map(|p| p.y).min().unwrap();
    let max_y = cells.keys().map(|p| p.y).max().unwrap();
    let mut out = String::new();
    for y in min_y..=max_y {
        for x in min_x..=max_x {
            out.push(match cells.get(&Vec2::new(x, y)) {
                None => '?',
                Some(cell) => map_glyph(cell),
            });
        }
        out.push('\n');
    }
    out
}

fn map_glyph(cell: &MapPercept) -> char {
    // Things are sorted entity < block < dispenser, which is also the
    // display priority.
    match cell.things.first() {
        Some(MapThing::Entity { team }) => return team.chars().next().unwrap_or('A'),
        Some(MapThing::Block { .. }) => return 'b',
        Some(MapThing::Dispenser { .. }) => return 'D',
        None => {}
    }
    match cell.terrain {
        Terrain::Obstacle => '#',
        Terrain::Goal => '*',
        Terrain::Empty => '.',
    }
}

fn banner(trace: &ReplayTrace, step: u64) -> String {
    // Scores shown are as of the beginning of the step.
    let scores: Vec<(String, u64)> = if step == 0 {
        (0..trace.header.config.teams)
            .map(|t| (team_name(t), 0))
            .collect()
    } else {
        trace.records[step as usize - 1]
            .scores
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect()
    };
    let scores = scores
        .iter()
        .map(|(t, s)| format!("{t}={s}"))
        .collect::<Vec<_>>()
        .join(" ");
    format!("step {step}  score {scores}\n")
}

/// Agent maps rebuilt straight from a live runner, for cross-checking the
/// renderer against serialized models.
pub fn frame_of_world(world: &WorldState) -> String {
    let mut out = String::new();
    for y in 0..world.height as i32 {
        for x in 0..world.width as i32 {
            out.push(global_glyph(world, Vec2::new(x, y)));
        }
        out.push('\n');
    }
    out
}

pub(super) fn name_of_entity(trace: &ReplayTrace, entity: usize) -> String {
    let (team, slot) = team_slot(&trace.header.config, entity);
    crate::config::agent_name(team, slot)
}
