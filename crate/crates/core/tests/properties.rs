//! Property tests: invariants that must hold for arbitrary inputs.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use assembler_core::config::SimConfig;
use assembler_core::geom::{Direction, Rotation, Vec2};
use assembler_core::identify::{pair_reports, SightingReport};
use assembler_core::map::{MapModel, MapPercept};
use assembler_core::sim::{
    ActionEffect, ActionRequest, Requirement, Terrain, WorldBuilder,
};

fn direction() -> impl Strategy<Value = Direction> {
    prop::sample::select(Direction::ALL.to_vec())
}

fn rotation() -> impl Strategy<Value = Rotation> {
    prop_oneof![Just(Rotation::Clockwise), Just(Rotation::CounterClockwise)]
}

// ---------------------------------------------------------------------------
// A* optimality against BFS on arbitrary maps.
// ---------------------------------------------------------------------------

fn arb_map() -> impl Strategy<Value = MapModel> {
    prop::collection::vec(prop::bool::weighted(0.7), 144).prop_map(|cells| {
        let percepts: Vec<MapPercept> = cells
            .iter()
            .enumerate()
            .map(|(i, open)| {
                let pos = Vec2::new((i % 12) as i32, (i / 12) as i32);
                MapPercept {
                    pos,
                    terrain: if *open { Terrain::Empty } else { Terrain::Obstacle },
                    things: Vec::new(),
                    last_seen: 0,
                }
            })
            .collect();
        let mut model = MapModel::new();
        model.merge_remote(&percepts, Vec2::ZERO);
        model
    })
}

proptest! {
    #[test]
    fn astar_is_always_bfs_optimal(model in arb_map(), fx in 0..12i32, fy in 0..12i32, tx in 0..12i32, ty in 0..12i32) {
        let from = Vec2::new(fx, fy);
        let to = Vec2::new(tx, ty);
        let astar = model.shortest_path(from, to).map(|p| p.len());
        let bfs = model.bfs_distance(from, to);
        prop_assert_eq!(astar, bfs);
    }
}

// ---------------------------------------------------------------------------
// Requirement planning: permutation and prefix-buildability for any input
// produced by the generation rules.
// ---------------------------------------------------------------------------

fn arb_generated_requirements() -> impl Strategy<Value = Vec<Requirement>> {
    // Random walk with S/E/W steps, no revisits, y >= 1.
    prop::collection::vec(0..3usize, 0..7).prop_map(|walk| {
        let mut cells = vec![Vec2::new(0, 1)];
        let mut current = Vec2::new(0, 1);
        for pick in walk {
            let options = [Vec2::new(1, 0), Vec2::new(-1, 0), Vec2::new(0, 1)];
            let mut placed = false;
            for i in 0..3 {
                let cand = current + options[(pick + i) % 3];
                if cand.y >= 1 && !cells.contains(&cand) {
                    cells.push(cand);
                    current = cand;
                    placed = true;
                    break;
                }
            }
            let _ = placed;
        }
        cells
            .into_iter()
            .map(|c| Requirement::new(c.x, c.y, "b0"))
            .collect()
    })
}

proptest! {
    #[test]
    fn plans_are_buildable_permutations(reqs in arb_generated_requirements()) {
        let plan = assembler_core::plan::plan_requirements(&reqs).unwrap();
        let mut a = reqs.clone();
        let mut b = plan.clone();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
        let mut placed = vec![Vec2::ZERO];
        for r in &plan {
            prop_assert!(placed.iter().any(|p| p.manhattan_to(r.offset()) == 1));
            placed.push(r.offset());
        }
    }
}

// ---------------------------------------------------------------------------
// Map merging: idempotent, and commutative when no last-seen ties exist.
// ---------------------------------------------------------------------------

fn arb_cells(last_seen_parity: u64) -> impl Strategy<Value = Vec<MapPercept>> {
    prop::collection::vec((0..8i32, 0..8i32, 0..20u64), 0..20).prop_map(move |triples| {
        let mut seen = BTreeSet::new();
        triples
            .into_iter()
            .filter(|(x, y, _)| seen.insert((*x, *y)))
            .map(|(x, y, t)| MapPercept {
                pos: Vec2::new(x, y),
                terrain: if (x + y) % 2 == 0 { Terrain::Empty } else { Terrain::Goal },
                things: Vec::new(),
                // Distinct parities keep last-seen ties impossible between
                // the two generated sets.
                last_seen: t * 2 + last_seen_parity,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn merge_idempotent_and_commutative_without_ties(
        a in arb_cells(0),
        b in arb_cells(1),
    ) {
        // Idempotence.
        let mut once = MapModel::new();
        once.merge_remote(&a, Vec2::ZERO);
        let mut twice = once.clone();
        twice.merge_remote(&a, Vec2::ZERO);
        prop_assert_eq!(&once, &twice);

        // Commutativity when no cell can tie on last_seen.
        let mut ab = MapModel::new();
        ab.merge_remote(&a, Vec2::ZERO);
        ab.merge_remote(&b, Vec2::ZERO);
        let mut ba = MapModel::new();
        ba.merge_remote(&b, Vec2::ZERO);
        ba.merge_remote(&a, Vec2::ZERO);
        prop_assert_eq!(ab, ba);
    }
}

// ---------------------------------------------------------------------------
// Identification pairing: every emitted pair is a unique antisymmetric
// match, and no reporter is consumed twice.
// ---------------------------------------------------------------------------

fn arb_reports() -> impl Strategy<Value = Vec<SightingReport>> {
    prop::collection::vec((0..10usize, -4..=4i32, -4..=4i32), 0..16).prop_map(|raw| {
        raw.into_iter()
            .filter(|(_, x, y)| (*x, *y) != (0, 0))
            .map(|(agent, x, y)| SightingReport {
                reporter: format!("T{agent}"),
                step: 1,
                offset: Vec2::new(x, y),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn pairings_are_unique_antisymmetric_matches(reports in arb_reports()) {
        let pairs = pair_reports(&reports);
        for pair in &pairs {
            // The paired offsets exist and are exact opposites...
            let a_report = reports
                .iter()
                .find(|r| r.reporter == pair.a && r.offset == pair.a_offset)
                .expect("pair cites a real report");
            let opposite: Vec<_> = reports
                .iter()
                .filter(|r| r.offset == -a_report.offset)
                .collect();
            let same: Vec<_> = reports
                .iter()
                .filter(|r| r.offset == a_report.offset)
                .collect();
            // ...and were unambiguous: exactly one candidate on each side.
            prop_assert_eq!(opposite.len(), 1);
            prop_assert_eq!(same.len(), 1);
            prop_assert_eq!(&opposite[0].reporter, &pair.b);
        }
    }
}

// ---------------------------------------------------------------------------
// Engine conservation: blocks live on exactly one cell each; only clears and
// submits remove them, only dispensers create them.
// ---------------------------------------------------------------------------

fn arb_actions(n: usize) -> impl Strategy<Value = Vec<Vec<ActionRequest>>> {
    let action = prop_oneof![
        4 => direction().prop_map(|d| ActionRequest::Move { direction: d }),
        2 => direction().prop_map(|d| ActionRequest::Attach { direction: d }),
        2 => direction().prop_map(|d| ActionRequest::Request { direction: d }),
        1 => direction().prop_map(|d| ActionRequest::Detach { direction: d }),
        1 => rotation().prop_map(|r| ActionRequest::Rotate { rotation: r }),
        1 => (-2..=2i32, -2..=2i32).prop_map(|(x, y)| ActionRequest::Clear { offset: Vec2::new(x, y) }),
        1 => Just(ActionRequest::Skip),
    ];
    prop::collection::vec(prop::collection::vec(action, n), 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn blocks_are_conserved_under_arbitrary_actions(steps in arb_actions(2)) {
        let config = SimConfig {
            teams: 1,
            entities_per_team: 2,
            width: 12,
            height: 12,
            obstacle_density: 0.0,
            clear_event_rate: 0.0,
            task_interval: 0,
            ..Default::default()
        };
        let mut world = WorldBuilder::new(config.clone())
            .dispenser(Vec2::new(5, 5), "b0")
            .dispenser(Vec2::new(8, 8), "b1")
            .entity(0, Vec2::new(5, 6))
            .entity(0, Vec2::new(8, 7))
            .build();
        let mut alive: BTreeSet<_> = world.blocks().map(|(id, _)| *id).collect();
        for actions in &steps {
            let outcome = world.apply_step(actions).unwrap();
            for record in &outcome.actions {
                match &record.effect {
                    Some(ActionEffect::Dispensed { block }) => {
                        prop_assert!(alive.insert(*block), "fresh id for every dispense");
                    }
                    Some(ActionEffect::ClearTriggered { destroyed_blocks, .. }) => {
                        for b in destroyed_blocks {
                            prop_assert!(alive.remove(b), "cleared blocks existed");
                        }
                    }
                    Some(ActionEffect::Submitted { consumed, .. }) => {
                        for b in consumed {
                            prop_assert!(alive.remove(b));
                        }
                    }
                    _ => {}
                }
            }
            // The ledger of effects accounts for the world exactly, and
            // every block sits on exactly one in-bounds cell.
            let now: BTreeSet<_> = world.blocks().map(|(id, _)| *id).collect();
            prop_assert_eq!(&now, &alive);
            let mut cells: BTreeMap<Vec2, u32> = BTreeMap::new();
            for (_, b) in world.blocks() {
                prop_assert!(world.in_bounds(b.pos));
                *cells.entry(b.pos).or_default() += 1;
            }
            prop_assert!(cells.values().all(|&c| c == 1));
        }
    }
}
