//! Seeded world and task generation.

use crate::config::SimConfig;
use crate::geom::Vec2;
use crate::rng::Pcg32;

use super::world::WorldBuilder;
use super::{EngineError, Requirement, TaskSpec, Terrain, WorldState};

/// Build the initial world deterministically from the config seed: scattered
/// obstacles, contiguous goal clusters, dispensers for every block type, and
/// entities on distinct empty cells. One task is generated up front so step-0
/// percepts already carry work.
pub fn generate_world(config: &SimConfig) -> Result<WorldState, EngineError> {
    config.validate()?;
    let mut rng = Pcg32::new(config.seed, 0);
    let mut builder = WorldBuilder::new(config.clone());

    // Obstacles first; goals and placements overwrite or avoid them.
    for y in 0..config.height as i32 {
        for x in 0..config.width as i32 {
            if rng.gen_f64() < config.obstacle_density {
                builder = builder.terrain(Vec2::new(x, y), Terrain::Obstacle);
            }
        }
    }

    // Goal clusters: Manhattan diamonds around random interior centers.
    let margin = config.goal_cluster_radius as i32;
    for _ in 0..config.goal_clusters {
        let span_x = config.width as i32 - 2 * margin;
        let span_y = config.height as i32 - 2 * margin;
        if span_x <= 0 || span_y <= 0 {
            return Err(crate::config::ConfigError::Invalid(
                "goal cluster radius too large for the map".into(),
            )
            .into());
        }
        let center = Vec2::new(
            margin + rng.gen_range(span_x as u32) as i32,
            margin + rng.gen_range(span_y as u32) as i32,
        );
        builder = builder.goal_area(center, config.goal_cluster_radius);
    }

    let mut world = builder.build();

    // Dispensers on empty non-goal cells.
    let mut free: Vec<Vec2> = all_cells(config)
        .into_iter()
        .filter(|&c| world.terrain_at(c) == Terrain::Empty)
        .collect();
    for ty in &config.block_types {
        for _ in 0..config.dispensers_per_type {
            if free.is_empty() {
                return Err(crate::config::ConfigError::Invalid(
                    "not enough empty cells for dispensers".into(),
                )
                .into());
            }
            let idx = rng.pick(free.len());
            let cell = free.swap_remove(idx);
            world.place_dispenser(cell, super::BlockType::new(ty.clone()));
        }
    }

    // Entities on distinct empty cells without dispensers.
    free.retain(|c| world.dispenser_at(*c).is_none());
    for team in 0..config.teams {
        for _slot in 0..config.entities_per_team {
            if free.is_empty() {
                return Err(crate::config::ConfigError::Invalid(
                    "not enough empty cells for entities".into(),
                )
                .into());
            }
            let idx = rng.pick(free.len());
            let cell = free.swap_remove(idx);
            world.place_entity(team, cell);
        }
    }

    world.rng = rng;
    let first = world.generate_task();
    world.tasks.push(first);
    Ok(world)
}

fn all_cells(config: &SimConfig) -> Vec<Vec2> {
    let mut cells = Vec::with_capacity((config.width * config.height) as usize);
    for y in 0..config.height as i32 {
        for x in 0..config.width as i32 {
            cells.push(Vec2::new(x, y));
        }
    }
    cells
}

impl WorldState {
    fn place_dispenser(&mut self, pos: Vec2, ty: super::BlockType) {
        self.dispensers_mut().insert(pos, ty);
    }

    fn place_entity(&mut self, team: u32, pos: Vec2) {
        let id = self.entities.len();
        self.entities.push(super::EntityState {
            id,
            team,
            pos,
            energy: self.config.energy_start,
            disabled_until: None,
            clear_charge: None,
        });
        self.push_last_action_slot();
    }

    /// Generate one task with the server's rules: the first requirement sits
    /// at (0, 1); every later one extends the walk south, east or west of its
    /// predecessor, never revisiting a cell and never rising above y = 1.
    pub fn generate_task(&mut self) -> TaskSpec {
        let cfg = self.config.clone();
        let [lo, hi] = cfg.task_size_range;
        let size = lo + self.rng.gen_range(hi - lo + 1);
        let mut cells = vec![Vec2::new(0, 1)];
        let mut current = Vec2::new(0, 1);
        for _ in 1..size {
            let candidates: Vec<Vec2> = [Vec2::new(1, 0), Vec2::new(-1, 0), Vec2::new(0, 1)]
                .into_iter()
                .map(|d| current + d)
                .filter(|c| c.y >= 1 && !cells.contains(c))
                .collect();
            // South is always open on a no-north walk, so this never stalls.
            let next = candidates[self.rng.pick(candidates.len())];
            cells.push(next);
            current = next;
        }
        let requirements = cells
            .into_iter()
            .map(|c| {
                let ty = cfg.block_types[self.rng.pick(cfg.block_types.len())].clone();
                Requirement {
                    x: c.x,
                    y: c.y,
                    block_type: super::BlockType::new(ty),
                }
            })
            .collect::<Vec<_>>();
        let name = format!("task{}", self.next_task_id);
        self.next_task_id += 1;
        TaskSpec {
            name,
            deadline: self.step + cfg.task_duration,
            reward: cfg.reward_base * size as u64,
            requirements,
            submitted_by: None,
        }
    }
}
