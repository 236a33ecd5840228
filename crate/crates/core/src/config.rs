//! Match configuration.
//!
//! A `SimConfig` fully determines a match: world generation, scenario
//! constants, agent roles, and run length. Every field has a default so
//! config files only need to override what they care about; the README
//! documents each key.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Role an in-simulation agent is assigned for the whole match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Builder,
    Attacker,
}

/// How a team's entities are driven by the runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TeamStrategy {
    /// Operator plus builder/attacker state machines.
    Full,
    /// Entities skip every step (useful as an inert opponent).
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub teams: u32,
    pub entities_per_team: u32,
    /// One role per entity slot; shared by all teams. Defaults to the first
    /// half builders, the rest attackers.
    pub roles: Option<Vec<Role>>,
    pub team_strategies: Option<Vec<TeamStrategy>>,
    pub vision_radius: u32,
    /// Inclusive `[min, max]` requirement count for generated tasks.
    pub task_size_range: [u32; 2],
    pub task_duration: u64,
    /// A new task is generated every `task_interval` steps.
    pub task_interval: u64,
    pub reward_base: u64,
    pub block_types: Vec<String>,
    pub dispensers_per_type: u32,
    pub obstacle_density: f64,
    pub goal_clusters: u32,
    pub goal_cluster_radius: u32,
    /// Per-step probability of scheduling a random clear event.
    pub clear_event_rate: f64,
    /// Maximum Manhattan radius of a random clear event (drawn in `1..=max`).
    pub clear_event_radius: u32,
    /// Steps between scheduling a clear event and it firing.
    pub clear_event_delay: u64,
    /// Obstacles regrown inside the area after a clear event fires.
    pub regen_obstacles: u32,
    pub disable_duration: u64,
    pub energy_start: u32,
    pub clear_energy_cost: u32,
    pub energy_regen: u32,
    pub max_steps: u64,
    /// Consecutive failed actions a builder tolerates before resetting.
    pub fail_tolerance: u32,
    /// Exploration chunk edge length.
    pub chunk_size: u32,
    /// Minimum steps left before deadline for a task to be worth assigning.
    pub min_slack: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            width: 30,
            height: 30,
            teams: 2,
            entities_per_team: 10,
            roles: None,
            team_strategies: None,
            vision_radius: 5,
            task_size_range: [1, 3],
            task_duration: 100,
            task_interval: 10,
            reward_base: 10,
            block_types: vec!["b0".into(), "b1".into(), "b2".into()],
            dispensers_per_type: 2,
            obstacle_density: 0.08,
            goal_clusters: 1,
            goal_cluster_radius: 2,
            clear_event_rate: 0.02,
            clear_event_radius: 2,
            clear_event_delay: 5,
            regen_obstacles: 2,
            disable_duration: 4,
            energy_start: 100,
            clear_energy_cost: 30,
            energy_regen: 1,
            max_steps: 500,
            fail_tolerance: 8,
            chunk_size: 5,
            min_slack: 60,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |msg: String| Err(ConfigError::Invalid(msg));
        if self.width < 10 || self.height < 10 {
            return err(format!(
                "map must be at least 10x10, got {}x{}",
                self.width, self.height
            ));
        }
        if self.teams == 0 || self.entities_per_team == 0 {
            return err("need at least one team with one entity".into());
        }
        if self.goal_clusters == 0 {
            return err("need at least one goal cluster".into());
        }
        if self.block_types.is_empty() {
            return err("need at least one block type".into());
        }
        if self.dispensers_per_type == 0 {
            return err("tasks require at least one dispenser per block type".into());
        }
        if self.task_size_range[0] == 0 || self.task_size_range[0] > self.task_size_range[1] {
            return err(format!(
                "bad task_size_range {:?}",
                self.task_size_range
            ));
        }
        if self.vision_radius == 0 {
            return err("vision_radius must be positive".into());
        }
        if self.chunk_size == 0 {
            return err("chunk_size must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.obstacle_density)
            || !(0.0..=1.0).contains(&self.clear_event_rate)
        {
            return err("densities and rates must lie in [0, 1]".into());
        }
        if let Some(roles) = &self.roles {
            if roles.len() != self.entities_per_team as usize {
                return err(format!(
                    "roles lists {} entries for {} entities per team",
                    roles.len(),
                    self.entities_per_team
                ));
            }
        }
        if let Some(strats) = &self.team_strategies {
            if strats.len() != self.teams as usize {
                return err(format!(
                    "team_strategies lists {} entries for {} teams",
                    strats.len(),
                    self.teams
                ));
            }
        }
        Ok(())
    }

    /// Effective role of an entity slot.
    pub fn role_of(&self, slot: u32) -> Role {
        match &self.roles {
            Some(roles) => roles[slot as usize],
            None => {
                // Default split: first half builders, rest attackers.
                if slot < self.entities_per_team.div_ceil(2) {
                    Role::Builder
                } else {
                    Role::Attacker
                }
            }
        }
    }

    pub fn strategy_of(&self, team: u32) -> TeamStrategy {
        match &self.team_strategies {
            Some(s) => s[team as usize],
            None => TeamStrategy::Full,
        }
    }

    pub fn total_entities(&self) -> usize {
        (self.teams * self.entities_per_team) as usize
    }
}

/// Display name of a team: `A`, `B`, ...
pub fn team_name(team: u32) -> String {
    let letter = (b'A' + (team % 26) as u8) as char;
    letter.to_string()
}

/// Agent names are the team letter plus a 1-based slot index: `A1`, `B3`, ...
pub fn agent_name(team: u32, slot: u32) -> String {
    format!("{}{}", team_name(team), slot + 1)
}

/// Entity id for a (team, slot) pair; ids are dense across teams.
pub fn entity_id(config: &SimConfig, team: u32, slot: u32) -> usize {
    (team * config.entities_per_team + slot) as usize
}

/// Inverse of `entity_id`.
pub fn team_slot(config: &SimConfig, entity: usize) -> (u32, u32) {
    let e = entity as u32;
    (e / config.entities_per_team, e % config.entities_per_team)
}

/// Entity id of an agent name like `B3`, if well-formed for this config.
pub fn entity_of_name(config: &SimConfig, name: &str) -> Option<usize> {
    let mut chars = name.chars();
    let letter = chars.next()?;
    let team = (letter as u32).checked_sub('A' as u32)?;
    let slot: u32 = chars.as_str().parse::<u32>().ok()?.checked_sub(1)?;
    if team < config.teams && slot < config.entities_per_team {
        Some(entity_id(config, team, slot))
    } else {
        None
    }
}

/// Name of a team's operator (not an in-simulation entity).
pub fn operator_name(team: u32) -> String {
    format!("op{}", team_name(team))
}
