//! Per-agent map model in the agent's virtual frame.
//!
//! Cells are keyed by virtual position; a missing cell is unknown. Updates
//! are last-seen-wins: every cell inside the current vision diamond is
//! overwritten each step, including overwriting stale things with emptiness.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::geom::{Direction, Vec2};
use crate::sim::{BlockType, RawPerceptSet, Terrain, ThingKind};

/// A thing remembered on a map cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MapThing {
    Entity { team: String },
    Block { block_type: BlockType, attached: bool },
    Dispenser { block_type: BlockType },
}

/// Everything known about one cell, stamped with when it was last seen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapPercept {
    pub pos: Vec2,
    pub terrain: Terrain,
    pub things: Vec<MapThing>,
    pub last_seen: u64,
}

impl MapPercept {
    /// A cell an agent could occupy: walkable terrain with nothing on it.
    pub fn traversable(&self) -> bool {
        self.terrain != Terrain::Obstacle && self.things.is_empty()
    }

    pub fn has_dispenser(&self, ty: &BlockType) -> bool {
        self.things
            .iter()
            .any(|t| matches!(t, MapThing::Dispenser { block_type } if block_type == ty))
    }

    pub fn is_goal(&self) -> bool {
        self.terrain == Terrain::Goal
    }
}

/// Step returned by the exploration heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExploreStep {
    Move(Direction),
    /// Unknown cells exist but none is reachable; caller should get unstuck.
    Enclosed,
    /// Nothing unknown borders the map; caller repeats the fixed fallback.
    Saturated,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapModel {
    #[serde(with = "crate::geom::serde_vec2_map")]
    cells: BTreeMap<Vec2, MapPercept>,
}

impl MapModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cell(&self, pos: Vec2) -> Option<&MapPercept> {
        self.cells.get(&pos)
    }

    pub fn cells(&self) -> impl Iterator<Item = (&Vec2, &MapPercept)> {
        self.cells.iter()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn known(&self, pos: Vec2) -> bool {
        self.cells.contains_key(&pos)
    }

    fn known_traversable(&self, pos: Vec2) -> bool {
        self.cells.get(&pos).is_some_and(MapPercept::traversable)
    }

    /// Overwrite every cell of the current vision diamond from raw percepts.
    /// `origin` is the agent's virtual position at `raw.step`. Percepts never
    /// include the perceiving agent, but it knows exactly where it stands, so
    /// the map marks it at the origin; merged maps then carry every entity.
    pub fn update_from_percepts(&mut self, origin: Vec2, raw: &RawPerceptSet, own_team: &str) {
        for (rel, terrain) in &raw.terrain {
            let pos = origin + *rel;
            let mut things: Vec<MapThing> = raw
                .things_at(*rel)
                .map(|t| match &t.kind {
                    ThingKind::Entity { team } => MapThing::Entity { team: team.clone() },
                    ThingKind::Block { block_type } => MapThing::Block {
                        block_type: block_type.clone(),
                        attached: raw.is_attached(*rel),
                    },
                    ThingKind::Dispenser { block_type } => MapThing::Dispenser {
                        block_type: block_type.clone(),
                    },
                })
                .collect();
            if *rel == Vec2::ZERO {
                things.push(MapThing::Entity {
                    team: own_team.to_string(),
                });
            }
            things.sort();
            self.cells.insert(
                pos,
                MapPercept {
                    pos,
                    terrain: *terrain,
                    things,
                    last_seen: raw.step,
                },
            );
        }
    }

    /// Cells refreshed at exactly `step`; the per-step sync pushes these to
    /// identified peers.
    pub fn cells_seen_at(&self, step: u64) -> Vec<MapPercept> {
        self.cells
            .values()
            .filter(|p| p.last_seen == step)
            .cloned()
            .collect()
    }

    /// Merge remote cells translated into this frame; per cell the larger
    /// last-seen wins, ties keep local.
    pub fn merge_remote(&mut self, remote: &[MapPercept], translation: Vec2) {
        for rp in remote {
            let pos = rp.pos + translation;
            let replace = match self.cells.get(&pos) {
                Some(local) => rp.last_seen > local.last_seen,
                None => true,
            };
            if replace {
                let mut cell = rp.clone();
                cell.pos = pos;
                self.cells.insert(pos, cell);
            }
        }
    }

    /// Nearest known cell matching the predicate, by path length over known
    /// traversable cells from `from`; the match itself may be blocked (so
    /// dispensers can be found). Ties break on (y, x).
    pub fn find_nearest(
        &self,
        from: Vec2,
        predicate: impl Fn(&MapPercept) -> bool,
    ) -> Option<Vec2> {
        let mut visited = BTreeSet::from([from]);
        let mut layer = vec![from];
        loop {
            let mut matched: Vec<Vec2> = layer
                .iter()
                .copied()
                .filter(|p| self.cells.get(p).is_some_and(&predicate))
                .collect();
            if !matched.is_empty() {
                matched.sort();
                return Some(matched[0]);
            }
            let mut next = Vec::new();
            for pos in &layer {
                // Matching blocked cells are terminal: enqueueable, not expandable.
                if *pos != from && !self.known_traversable(*pos) {
                    continue;
                }
                for n in pos.neighbours() {
                    if visited.contains(&n) || !self.known(n) {
                        continue;
                    }
                    if self.known_traversable(n) || self.cells.get(&n).is_some_and(&predicate) {
                        visited.insert(n);
                        next.push(n);
                    }
                }
            }
            if next.is_empty() {
                return None;
            }
            next.sort();
            next.dedup();
            layer = next;
        }
    }

    /// A* over known traversable cells, 4-connected, Manhattan heuristic.
    /// The destination is exempt from the thing check so agents can path
    /// onto or adjacent to occupied targets; unknown cells never traverse.
    pub fn shortest_path(&self, from: Vec2, to: Vec2) -> Option<Vec<Direction>> {
        if from == to {
            return Some(Vec::new());
        }
        let enterable = |pos: Vec2| {
            if pos == to {
                self.cells
                    .get(&pos)
                    .is_some_and(|c| c.terrain != Terrain::Obstacle)
            } else {
                self.known_traversable(pos)
            }
        };
        if !self.known(from) || !enterable(to) {
            return None;
        }

        // Deterministic A*: the heap orders by (f, g, pos), all ties fixed.
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let mut open: BinaryHeap<Reverse<(u32, u32, Vec2)>> = BinaryHeap::new();
        let mut g_score: BTreeMap<Vec2, u32> = BTreeMap::new();
        let mut came_from: BTreeMap<Vec2, Vec2> = BTreeMap::new();
        g_score.insert(from, 0);
        open.push(Reverse((from.manhattan_to(to), 0, from)));

        while let Some(Reverse((_, g, current))) = open.pop() {
            if g > g_score[&current] {
                continue;
            }
            if current == to {
                let mut path = Vec::new();
                let mut cur = to;
                while cur != from {
                    let prev = came_from[&cur];
                    path.push(Direction::from_delta(cur - prev).expect("unit step"));
                    cur = prev;
                }
                path.reverse();
                return Some(path);
            }
            for next in current.neighbours() {
                if !enterable(next) {
                    continue;
                }
                let tentative = g + 1;
                if g_score.get(&next).is_none_or(|&old| tentative < old) {
                    g_score.insert(next, tentative);
                    came_from.insert(next, current);
                    open.push(Reverse((tentative + next.manhattan_to(to), tentative, next)));
                }
            }
        }
        None
    }

    /// Shortest path to a cell adjacent to `target` (empty if already there).
    pub fn path_adjacent(&self, from: Vec2, target: Vec2) -> Option<Vec<Direction>> {
        if from.manhattan_to(target) == 1 {
            return Some(Vec::new());
        }
        let mut path = self.shortest_path(from, target)?;
        path.pop();
        Some(path)
    }

    /// Whether immediate percepts contradict the next step of a path. Cells
    /// the agent's own attachments occupy are not contradictions, and cells
    /// outside vision cannot contradict.
    pub fn path_invalidated(
        path: &[Direction],
        raw: &RawPerceptSet,
        own_offsets: &BTreeSet<Vec2>,
    ) -> bool {
        let Some(next) = path.first() else {
            return false;
        };
        let rel = next.delta();
        if own_offsets.contains(&rel) {
            return false;
        }
        match raw.terrain_at(rel) {
            Some(Terrain::Obstacle) => true,
            Some(_) => raw.things_at(rel).next().is_some(),
            None => false,
        }
    }

    /// First step toward the nearest chunk of the map that still has unknown
    /// frontier cells. Chunks are `chunk_size` squares; the chunk whose
    /// centroid is nearest `from` wins (ties by chunk (y, x)).
    pub fn explore_direction(&self, from: Vec2, chunk_size: u32) -> ExploreStep {
        let cs = chunk_size as i32;
        // Unknown cells adjacent to the known region, grouped by chunk.
        let mut chunk_frontiers: BTreeMap<Vec2, Vec<Vec2>> = BTreeMap::new();
        for (pos, percept) in &self.cells {
            if !percept.traversable() {
                continue;
            }
            for n in pos.neighbours() {
                if !self.known(n) {
                    let chunk = Vec2::new(n.x.div_euclid(cs), n.y.div_euclid(cs));
                    chunk_frontiers.entry(chunk).or_default().push(n);
                }
            }
        }
        if chunk_frontiers.is_empty() {
            return ExploreStep::Saturated;
        }
        let centroid_dist = |chunk: &Vec2| {
            let cx = (chunk.x * cs) as f64 + (cs as f64 - 1.0) / 2.0;
            let cy = (chunk.y * cs) as f64 + (cs as f64 - 1.0) / 2.0;
            let dx = cx - from.x as f64;
            let dy = cy - from.y as f64;
            dx * dx + dy * dy
        };
        let mut chunks: Vec<Vec2> = chunk_frontiers.keys().copied().collect();
        chunks.sort_by(|a, b| {
            centroid_dist(a)
                .partial_cmp(&centroid_dist(b))
                .unwrap()
                .then(a.cmp(b))
        });

        for chunk in chunks {
            // Known traversable cells bordering this chunk's unknown frontier.
            let mut targets: BTreeSet<Vec2> = BTreeSet::new();
            for unknown in &chunk_frontiers[&chunk] {
                for n in unknown.neighbours() {
                    if self.known_traversable(n) {
                        targets.insert(n);
                    }
                }
            }
            if let Some(step) = self.bfs_first_step(from, &targets) {
                return ExploreStep::Move(step);
            }
        }
        ExploreStep::Enclosed
    }

    /// BFS shortest-path length with the same traversability rules as
    /// `shortest_path`; the independent oracle for A* checks.
    pub fn bfs_distance(&self, from: Vec2, to: Vec2) -> Option<usize> {
        if from == to {
            return Some(0);
        }
        let enterable = |pos: Vec2| {
            if pos == to {
                self.cells
                    .get(&pos)
                    .is_some_and(|c| c.terrain != Terrain::Obstacle)
            } else {
                self.known_traversable(pos)
            }
        };
        if !self.known(from) || !enterable(to) {
            return None;
        }
        let mut dist: BTreeMap<Vec2, usize> = BTreeMap::from([(from, 0)]);
        let mut queue = VecDeque::from([from]);
        while let Some(pos) = queue.pop_front() {
            let d = dist[&pos];
            for n in pos.neighbours() {
                if dist.contains_key(&n) || !enterable(n) {
                    continue;
                }
                if n == to {
                    return Some(d + 1);
                }
                dist.insert(n, d + 1);
                queue.push_back(n);
            }
        }
        None
    }

    /// First direction of a shortest path from `from` to any target cell.
    fn bfs_first_step(&self, from: Vec2, targets: &BTreeSet<Vec2>) -> Option<Direction> {
        if targets.contains(&from) {
            // Already bordering the unknown; step into the nearest unknown
            // neighbour instead of standing still.
            return from
                .neighbours()
                .into_iter()
                .filter(|n| !self.known(*n))
                .min()
                .and_then(|n| Direction::from_delta(n - from));
        }
        let mut came: BTreeMap<Vec2, Vec2> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        let mut visited = BTreeSet::from([from]);
        let mut hit: Option<Vec2> = None;
        'outer: while let Some(pos) = queue.pop_front() {
            let mut neighbours = pos.neighbours();
            neighbours.sort();
            for n in neighbours {
                if visited.contains(&n) || !self.known_traversable(n) {
                    continue;
                }
                visited.insert(n);
                came.insert(n, pos);
                if targets.contains(&n) {
                    hit = Some(n);
                    break 'outer;
                }
                queue.push_back(n);
            }
        }
        let mut cur = hit?;
        while came[&cur] != from {
            cur = came[&cur];
        }
        Direction::from_delta(cur - from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Pcg32;

    fn known(terrain: Terrain) -> MapPercept {
        MapPercept {
            pos: Vec2::ZERO,
            terrain,
            things: Vec::new(),
            last_seen: 0,
        }
    }

    fn grid(width: i32, height: i32, obstacles: &[Vec2]) -> MapModel {
        let mut model = MapModel::new();
        for y in 0..height {
            for x in 0..width {
                let pos = Vec2::new(x, y);
                let terrain = if obstacles.contains(&pos) {
                    Terrain::Obstacle
                } else {
                    Terrain::Empty
                };
                model.cells.insert(
                    pos,
                    MapPercept {
                        pos,
                        ..known(terrain)
                    },
                );
            }
        }
        model
    }

    fn with_thing(model: &mut MapModel, pos: Vec2, thing: MapThing) {
        model.cells.get_mut(&pos).unwrap().things.push(thing);
    }

    #[test]
    fn empty_path_when_start_is_goal() {
        let model = grid(5, 5, &[]);
        assert_eq!(model.shortest_path(Vec2::ZERO, Vec2::ZERO), Some(vec![]));
    }

    #[test]
    fn corner_to_corner_is_manhattan_on_empty_grid() {
        let model = grid(5, 5, &[]);
        let path = model.shortest_path(Vec2::ZERO, Vec2::new(4, 4)).unwrap();
        assert_eq!(path.len(), 8);
    }

    #[test]
    fn unknown_cells_are_not_traversable() {
        let mut model = grid(3, 1, &[]);
        // Remove the middle cell: no path around it in a 3x1 strip.
        model.cells.remove(&Vec2::new(1, 0));
        assert_eq!(model.shortest_path(Vec2::ZERO, Vec2::new(2, 0)), None);
    }

    #[test]
    fn destination_exempt_from_thing_check() {
        let mut model = grid(3, 3, &[]);
        with_thing(
            &mut model,
            Vec2::new(2, 2),
            MapThing::Dispenser {
                block_type: BlockType::new("b0"),
            },
        );
        // Can path onto the dispenser cell as a destination...
        assert!(model.shortest_path(Vec2::ZERO, Vec2::new(2, 2)).is_some());
        // ...but never through it.
        let mut corridor = grid(3, 1, &[]);
        with_thing(
            &mut corridor,
            Vec2::new(1, 0),
            MapThing::Dispenser {
                block_type: BlockType::new("b0"),
            },
        );
        assert_eq!(corridor.shortest_path(Vec2::ZERO, Vec2::new(2, 0)), None);
    }

    #[test]
    fn astar_matches_bfs_on_random_maps() {
        // 200 random 20x20 maps, a handful of start/goal pairs each.
        let mut rng = Pcg32::new(99, 0);
        for _ in 0..200 {
            let mut obstacles = Vec::new();
            for y in 0..20 {
                for x in 0..20 {
                    if rng.gen_f64() < 0.3 {
                        obstacles.push(Vec2::new(x, y));
                    }
                }
            }
            let model = grid(20, 20, &obstacles);
            for _ in 0..5 {
                let from = Vec2::new(rng.gen_range(20) as i32, rng.gen_range(20) as i32);
                let to = Vec2::new(rng.gen_range(20) as i32, rng.gen_range(20) as i32);
                if obstacles.contains(&from) {
                    continue;
                }
                let astar = model.shortest_path(from, to).map(|p| p.len());
                let bfs = model.bfs_distance(from, to);
                assert_eq!(astar, bfs, "from {from} to {to}");
            }
        }
    }

    #[test]
    fn find_nearest_prefers_shorter_path_and_breaks_ties_row_major() {
        let mut model = grid(9, 9, &[]);
        let disp = |m: &mut MapModel, pos: Vec2| {
            with_thing(
                m,
                pos,
                MapThing::Dispenser {
                    block_type: BlockType::new("b0"),
                },
            )
        };
        disp(&mut model, Vec2::new(3, 0)); // path distance 3
        disp(&mut model, Vec2::new(7, 0)); // path distance 7
        let hit = model.find_nearest(Vec2::ZERO, |p| p.has_dispenser(&BlockType::new("b0")));
        assert_eq!(hit, Some(Vec2::new(3, 0)));

        // Equidistant pair: (y, x) order decides.
        let mut tie = grid(9, 9, &[]);
        disp(&mut tie, Vec2::new(2, 1));
        disp(&mut tie, Vec2::new(1, 2));
        let hit = tie.find_nearest(Vec2::ZERO, |p| p.has_dispenser(&BlockType::new("b0")));
        assert_eq!(hit, Some(Vec2::new(2, 1)));
    }

    #[test]
    fn find_nearest_none_when_absent() {
        let model = grid(4, 4, &[]);
        assert_eq!(
            model.find_nearest(Vec2::ZERO, |p| p.has_dispenser(&BlockType::new("b9"))),
            None
        );
    }

    #[test]
    fn find_nearest_walls_block_the_path_metric() {
        // The match is close as the crow flies but far by path.
        let mut obstacles = Vec::new();
        for y in 0..4 {
            obstacles.push(Vec2::new(1, y));
        }
        let mut model = grid(5, 5, &obstacles);
        with_thing(
            &mut model,
            Vec2::new(2, 0),
            MapThing::Dispenser {
                block_type: BlockType::new("b0"),
            },
        );
        with_thing(
            &mut model,
            Vec2::new(0, 4),
            MapThing::Dispenser {
                block_type: BlockType::new("b0"),
            },
        );
        // Straight-line nearest is (2,0) at distance 2, but the wall forces
        // a detour of length 6; (0,4) is 4 away by path.
        let hit = model.find_nearest(Vec2::ZERO, |p| p.has_dispenser(&BlockType::new("b0")));
        assert_eq!(hit, Some(Vec2::new(0, 4)));
    }

    #[test]
    fn update_overwrites_stale_things() {
        use crate::sim::{RawPerceptSet, ThingKind, ThingPercept};
        let raw = |step: u64, with_block: bool| RawPerceptSet {
            step,
            score: 0,
            energy: 0,
            disabled: false,
            last_action: None,
            last_action_result: None,
            terrain: vec![(Vec2::ZERO, Terrain::Empty), (Vec2::new(1, 0), Terrain::Empty)],
            things: if with_block {
                vec![ThingPercept {
                    rel: Vec2::new(1, 0),
                    kind: ThingKind::Block {
                        block_type: BlockType::new("b0"),
                    },
                }]
            } else {
                vec![]
            },
            attached: vec![],
            tasks: vec![],
        };
        let mut model = MapModel::new();
        model.update_from_percepts(Vec2::ZERO, &raw(3, true), "A");
        assert!(!model.cell(Vec2::new(1, 0)).unwrap().things.is_empty());
        assert_eq!(model.cell(Vec2::new(1, 0)).unwrap().last_seen, 3);
        // The agent marks itself at the origin.
        assert!(model
            .cell(Vec2::ZERO)
            .unwrap()
            .things
            .contains(&MapThing::Entity { team: "A".into() }));
        model.update_from_percepts(Vec2::ZERO, &raw(9, false), "A");
        let cell = model.cell(Vec2::new(1, 0)).unwrap();
        assert!(cell.things.is_empty(), "stale block overwritten");
        assert_eq!(cell.last_seen, 9);
    }

    #[test]
    fn merge_prefers_fresher_cells_and_translates() {
        let mut local = MapModel::new();
        local.cells.insert(
            Vec2::new(5, 5),
            MapPercept {
                pos: Vec2::new(5, 5),
                last_seen: 10,
                ..known(Terrain::Empty)
            },
        );
        let remote = vec![
            MapPercept {
                pos: Vec2::new(0, 0),
                last_seen: 4,
                ..known(Terrain::Obstacle)
            },
            MapPercept {
                pos: Vec2::new(1, 0),
                last_seen: 4,
                ..known(Terrain::Goal)
            },
        ];
        // Translation (5, 5): remote (0,0) collides with the fresher local.
        local.merge_remote(&remote, Vec2::new(5, 5));
        assert_eq!(local.cell(Vec2::new(5, 5)).unwrap().terrain, Terrain::Empty);
        assert_eq!(local.cell(Vec2::new(6, 5)).unwrap().terrain, Terrain::Goal);
        assert_eq!(local.cell(Vec2::new(6, 5)).unwrap().pos, Vec2::new(6, 5));

        // Remote newer wins.
        let newer = vec![MapPercept {
            pos: Vec2::new(0, 0),
            last_seen: 20,
            ..known(Terrain::Obstacle)
        }];
        local.merge_remote(&newer, Vec2::new(5, 5));
        assert_eq!(
            local.cell(Vec2::new(5, 5)).unwrap().terrain,
            Terrain::Obstacle
        );
    }

    #[test]
    fn merge_is_idempotent() {
        let remote = vec![
            MapPercept {
                pos: Vec2::new(2, 3),
                last_seen: 7,
                ..known(Terrain::Goal)
            },
            MapPercept {
                pos: Vec2::new(2, 4),
                last_seen: 8,
                ..known(Terrain::Empty)
            },
        ];
        let mut once = MapModel::new();
        once.merge_remote(&remote, Vec2::new(1, 1));
        let mut twice = once.clone();
        twice.merge_remote(&remote, Vec2::new(1, 1));
        assert_eq!(once, twice);
    }

    #[test]
    fn path_invalidated_only_by_visible_blockers() {
        use crate::sim::{RawPerceptSet, ThingKind, ThingPercept};
        let raw = RawPerceptSet {
            step: 0,
            score: 0,
            energy: 0,
            disabled: false,
            last_action: None,
            last_action_result: None,
            terrain: vec![
                (Vec2::new(0, 1), Terrain::Empty),
                (Vec2::new(1, 0), Terrain::Empty),
            ],
            things: vec![ThingPercept {
                rel: Vec2::new(1, 0),
                kind: ThingKind::Entity { team: "B".into() },
            }],
            attached: vec![],
            tasks: vec![],
        };
        let own = std::collections::BTreeSet::new();
        // Next cell clear: fine.
        assert!(!MapModel::path_invalidated(
            &[Direction::South],
            &raw,
            &own
        ));
        // Enemy stepped onto the next cell: invalid.
        assert!(MapModel::path_invalidated(&[Direction::East], &raw, &own));
        // Own attachment on the next cell does not contradict the path.
        let own: std::collections::BTreeSet<Vec2> = [Vec2::new(1, 0)].into();
        assert!(!MapModel::path_invalidated(&[Direction::East], &raw, &own));
    }

    #[test]
    fn first_update_knows_the_whole_diamond() {
        use crate::sim::RawPerceptSet;
        let mut terrain = Vec::new();
        for dy in -5i32..=5 {
            let span = 5 - dy.abs();
            for dx in -span..=span {
                terrain.push((Vec2::new(dx, dy), Terrain::Empty));
            }
        }
        let raw = RawPerceptSet {
            step: 0,
            score: 0,
            energy: 100,
            disabled: false,
            last_action: None,
            last_action_result: None,
            terrain,
            things: vec![],
            attached: vec![],
            tasks: vec![],
        };
        let mut model = MapModel::new();
        model.update_from_percepts(Vec2::ZERO, &raw, "A");
        assert_eq!(model.len(), 61);
        assert!(model.cells().all(|(_, c)| c.last_seen == 0));
    }

    #[test]
    fn fresh_agent_explores_deterministically() {
        use crate::sim::RawPerceptSet;
        let mut terrain = Vec::new();
        for dy in -5i32..=5 {
            let span = 5 - dy.abs();
            for dx in -span..=span {
                terrain.push((Vec2::new(dx, dy), Terrain::Empty));
            }
        }
        let raw = RawPerceptSet {
            step: 0,
            score: 0,
            energy: 100,
            disabled: false,
            last_action: None,
            last_action_result: None,
            terrain,
            things: vec![],
            attached: vec![],
            tasks: vec![],
        };
        let mut model = MapModel::new();
        model.update_from_percepts(Vec2::ZERO, &raw, "A");
        // Everything beyond the diamond is unknown; the pick is fixed by the
        // tie rules and stable across calls.
        let first = model.explore_direction(Vec2::ZERO, 5);
        assert!(matches!(first, ExploreStep::Move(_)));
        for _ in 0..5 {
            assert_eq!(model.explore_direction(Vec2::ZERO, 5), first);
        }
    }

    #[test]
    fn explore_heads_for_missing_chunk() {
        // Fully known 20x20 map except an unknown north-west chunk.
        let mut model = grid(20, 20, &[]);
        for y in 0..5 {
            for x in 0..5 {
                model.cells.remove(&Vec2::new(x, y));
            }
        }
        let step = model.explore_direction(Vec2::new(10, 10), 5);
        match step {
            ExploreStep::Move(d) => {
                assert!(
                    d == Direction::North || d == Direction::West,
                    "expected a step toward the north-west, got {d}"
                );
            }
            other => panic!("expected a move, got {other:?}"),
        }
    }

    #[test]
    fn explore_saturated_without_frontier() {
        // A map fully enclosed by known obstacles has no unknown frontier.
        let mut obstacles = Vec::new();
        for i in 0..6 {
            obstacles.push(Vec2::new(i, 0));
            obstacles.push(Vec2::new(i, 5));
            obstacles.push(Vec2::new(0, i));
            obstacles.push(Vec2::new(5, i));
        }
        let model = grid(6, 6, &obstacles);
        assert_eq!(
            model.explore_direction(Vec2::new(2, 2), 5),
            ExploreStep::Saturated
        );
    }

    #[test]
    fn explore_enclosed_when_frontier_unreachable() {
        // The agent sits in a fully sealed room; a second known room
        // elsewhere borders unknown territory, so a frontier exists but
        // nothing can reach it.
        let mut model = MapModel::new();
        let mut put = |pos: Vec2, terrain: Terrain| {
            model.cells.insert(
                pos,
                MapPercept {
                    pos,
                    ..known(terrain)
                },
            );
        };
        for y in 0..=4 {
            for x in 0..=4 {
                let edge = x == 0 || x == 4 || y == 0 || y == 4;
                put(
                    Vec2::new(x, y),
                    if edge { Terrain::Obstacle } else { Terrain::Empty },
                );
            }
        }
        // Far room, separated from the sealed box by the unknown column x=5.
        for y in 1..=3 {
            for x in 6..=8 {
                put(Vec2::new(x, y), Terrain::Empty);
            }
        }
        assert_eq!(
            model.explore_direction(Vec2::new(2, 2), 5),
            ExploreStep::Enclosed
        );
    }
}
