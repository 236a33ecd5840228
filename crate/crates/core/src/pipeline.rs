//! Step-synchronized percept ingestion.
//!
//! One designated updater parses each agent's raw percepts exactly once per
//! step into that agent's container: virtual position, attachment model and
//! map model. Readers block until the container is ready for the step they
//! ask for and then get an immutable snapshot. A single-threaded
//! update-then-read sequence works identically.

use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex};

use thiserror::Error;

use crate::attach::AttachmentModel;
use crate::config::Role;
use crate::geom::Vec2;
use crate::identify::Translation;
use crate::map::MapModel;
use crate::sim::{ActionRequest, ActionResult, RawPerceptSet};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PipelineError {
    #[error("unknown agent {0}")]
    UnknownAgent(String),
}

/// Immutable view of one agent's state for one step.
#[derive(Debug, Clone)]
pub struct AgentSnapshot {
    pub name: String,
    pub entity: usize,
    pub team: u32,
    pub role: Role,
    pub step: u64,
    pub virtual_pos: Vec2,
    pub raw: Arc<RawPerceptSet>,
    pub map: Arc<MapModel>,
    pub attach: AttachmentModel,
    pub identified: BTreeMap<String, Translation>,
}

struct ContainerState {
    entity: usize,
    team: u32,
    role: Role,
    ready_step: Option<u64>,
    parses: u64,
    virtual_pos: Vec2,
    raw: Arc<RawPerceptSet>,
    map: Arc<MapModel>,
    attach: AttachmentModel,
    identified: BTreeMap<String, Translation>,
}

struct ContainerCell {
    state: Mutex<ContainerState>,
    ready: Condvar,
}

/// Owns the containers of every agent; the run loop is the single updater.
pub struct Pipeline {
    containers: BTreeMap<String, Arc<ContainerCell>>,
}

impl Pipeline {
    pub fn new(agents: impl IntoIterator<Item = (String, usize, u32, Role)>) -> Self {
        let containers = agents
            .into_iter()
            .map(|(name, entity, team, role)| {
                let state = ContainerState {
                    entity,
                    team,
                    role,
                    ready_step: None,
                    parses: 0,
                    virtual_pos: Vec2::ZERO,
                    raw: Arc::new(empty_percepts()),
                    map: Arc::new(MapModel::new()),
                    attach: AttachmentModel::new(),
                    identified: BTreeMap::new(),
                };
                (
                    name,
                    Arc::new(ContainerCell {
                        state: Mutex::new(state),
                        ready: Condvar::new(),
                    }),
                )
            })
            .collect();
        Pipeline { containers }
    }

    pub fn agent_names(&self) -> Vec<String> {
        self.containers.keys().cloned().collect()
    }

    /// Ingest one step's percepts for every agent. Must be called exactly
    /// once per engine step, by the one updater context.
    pub fn poll_and_update(&self, percepts: BTreeMap<String, RawPerceptSet>) {
        for (name, raw) in percepts {
            let cell = self
                .containers
                .get(&name)
                .unwrap_or_else(|| panic!("percepts for unknown agent {name}"));
            let mut state = cell.state.lock().unwrap();
            debug_assert!(
                state.ready_step.is_none_or(|s| raw.step > s),
                "step {} ingested twice",
                raw.step
            );

            // Virtual position advances only on an own successful move.
            if let (Some(ActionRequest::Move { direction }), Some(ActionResult::Success)) =
                (&raw.last_action, raw.last_action_result)
            {
                state.virtual_pos += direction.delta();
            }
            if let (Some(action), Some(result)) = (&raw.last_action, raw.last_action_result) {
                let action = action.clone();
                state
                    .attach
                    .on_action(&action, result, &raw)
                    .expect("attachment model consistent with engine outcomes");
            }
            state.attach.refresh(&raw);

            let mut map = MapModel::clone(&state.map);
            let own_team = crate::config::team_name(state.team);
            map.update_from_percepts(state.virtual_pos, &raw, &own_team);
            state.map = Arc::new(map);

            state.raw = Arc::new(raw);
            state.parses += 1;
            state.ready_step = Some(state.raw.step);
            cell.ready.notify_all();
        }
    }

    /// Container snapshot for `step`, blocking until ready.
    pub fn get_container(&self, name: &str, step: u64) -> Result<AgentSnapshot, PipelineError> {
        let cell = self
            .containers
            .get(name)
            .ok_or_else(|| PipelineError::UnknownAgent(name.to_string()))?;
        let mut state = cell.state.lock().unwrap();
        while state.ready_step.is_none_or(|s| s < step) {
            state = cell.ready.wait(state).unwrap();
        }
        Ok(AgentSnapshot {
            name: name.to_string(),
            entity: state.entity,
            team: state.team,
            role: state.role,
            step: state.ready_step.unwrap(),
            virtual_pos: state.virtual_pos,
            raw: Arc::clone(&state.raw),
            map: Arc::clone(&state.map),
            attach: state.attach.clone(),
            identified: state.identified.clone(),
        })
    }

    /// How many times an agent's percepts were parsed (exactly-once checks).
    pub fn parse_count(&self, name: &str) -> Result<u64, PipelineError> {
        let cell = self
            .containers
            .get(name)
            .ok_or_else(|| PipelineError::UnknownAgent(name.to_string()))?;
        Ok(cell.state.lock().unwrap().parses)
    }

    /// Record a confirmed identification on one side and exchange full maps.
    /// `translation` maps `peer`'s frame into `name`'s frame.
    pub fn record_identification(&self, name: &str, peer: &str, translation: Translation) {
        let cell = &self.containers[name];
        let mut state = cell.state.lock().unwrap();
        state.identified.insert(peer.to_string(), translation);
    }

    /// Merge `cells` (in `peer`'s frame) into `name`'s map through the
    /// recorded translation.
    pub fn merge_into(&self, name: &str, peer: &str, cells: &[crate::map::MapPercept]) {
        let cell = &self.containers[name];
        let mut state = cell.state.lock().unwrap();
        let Some(translation) = state.identified.get(peer).copied() else {
            return;
        };
        let mut map = MapModel::clone(&state.map);
        map.merge_remote(cells, translation.delta);
        state.map = Arc::new(map);
    }

    /// Gain a block on the attachment model (master side of a connect).
    pub fn attach_gain(&self, name: &str, offset: Vec2, ty: crate::sim::BlockType) {
        let cell = &self.containers[name];
        let mut state = cell.state.lock().unwrap();
        state
            .attach
            .gain(offset, ty)
            .expect("gained offset must be free");
    }

    /// All map cells of an agent, cloned (for sync and serialization).
    pub fn map_cells(&self, name: &str) -> Vec<crate::map::MapPercept> {
        let state = self.containers[name].state.lock().unwrap();
        state.map.cells().map(|(_, p)| p.clone()).collect()
    }

    /// Map cells of an agent seen at exactly `step`.
    pub fn map_cells_seen_at(&self, name: &str, step: u64) -> Vec<crate::map::MapPercept> {
        let state = self.containers[name].state.lock().unwrap();
        state.map.cells_seen_at(step)
    }
}

fn empty_percepts() -> RawPerceptSet {
    RawPerceptSet {
        step: 0,
        score: 0,
        energy: 0,
        disabled: false,
        last_action: None,
        last_action_result: None,
        terrain: Vec::new(),
        things: Vec::new(),
        attached: Vec::new(),
        tasks: Vec::new(),
    }
}
