use std::collections::BTreeSet;

use crate::config::SimConfig;
use crate::geom::{Direction, Rotation, Vec2};

use super::*;

/// Quiet fixture config: no random events, no periodic tasks, no obstacles.
fn fixture_config(teams: u32, entities_per_team: u32) -> SimConfig {
    SimConfig {
        seed: 7,
        width: 12,
        height: 12,
        teams,
        entities_per_team,
        clear_event_rate: 0.0,
        task_interval: 0,
        obstacle_density: 0.0,
        ..Default::default()
    }
}

fn skip_all(world: &WorldState) -> Vec<ActionRequest> {
    vec![ActionRequest::Skip; world.entities.len()]
}

fn act(world: &WorldState, entity: usize, action: ActionRequest) -> Vec<ActionRequest> {
    let mut actions = skip_all(world);
    actions[entity] = action;
    actions
}

#[test]
fn world_generation_is_deterministic() {
    let config = SimConfig::default();
    let a = generate_world(&config).unwrap();
    let b = generate_world(&config).unwrap();
    assert_eq!(a, b);
}

#[test]
fn different_seeds_differ() {
    let a = generate_world(&SimConfig::default()).unwrap();
    let b = generate_world(&SimConfig {
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let mut differs = false;
    for y in 0..a.height as i32 {
        for x in 0..a.width as i32 {
            if a.terrain_at(Vec2::new(x, y)) != b.terrain_at(Vec2::new(x, y)) {
                differs = true;
            }
        }
    }
    assert!(differs, "obstacle layouts should differ between seeds");
}

#[test]
fn invalid_config_rejected() {
    let config = SimConfig {
        dispensers_per_type: 0,
        ..Default::default()
    };
    assert!(generate_world(&config).is_err());
}

#[test]
fn generated_tasks_follow_server_rules() {
    // Brute-force validator over 1000 generated tasks: first requirement at
    // (0, 1), each successor south/east/west of its predecessor, no cell
    // revisited, never above y = 1.
    let config = SimConfig {
        task_size_range: [1, 6],
        ..Default::default()
    };
    let mut world = generate_world(&config).unwrap();
    for _ in 0..1000 {
        let task = world.generate_task();
        let cells: Vec<Vec2> = task.requirements.iter().map(|r| r.offset()).collect();
        assert_eq!(cells[0], Vec2::new(0, 1), "first requirement at (0, 1)");
        let mut seen = BTreeSet::new();
        seen.insert(cells[0]);
        for w in cells.windows(2) {
            let delta = w[1] - w[0];
            assert!(
                [Vec2::new(0, 1), Vec2::new(1, 0), Vec2::new(-1, 0)].contains(&delta),
                "successor must be S, E or W of its predecessor"
            );
            assert!(seen.insert(w[1]), "no revisits");
        }
        assert!(cells.iter().all(|c| c.y >= 1), "never north of the agent");
        assert_eq!(task.reward, config.reward_base * cells.len() as u64);
    }
}

#[test]
fn percept_diamond_has_61_cells_at_radius_5() {
    let config = fixture_config(1, 1);
    let world = WorldBuilder::new(config).entity(0, Vec2::new(6, 6)).build();
    let raw = compute_percepts(&world, 0);
    assert_eq!(raw.terrain.len(), 61);
    // Alone on an empty map: terrain only, no things at all.
    assert!(raw.things.is_empty());
    assert!(raw.attached.is_empty());
}

#[test]
fn out_of_bounds_reads_as_obstacle() {
    let config = fixture_config(1, 1);
    let world = WorldBuilder::new(config).entity(0, Vec2::new(0, 0)).build();
    let raw = compute_percepts(&world, 0);
    assert_eq!(raw.terrain.len(), 61);
    assert_eq!(raw.terrain_at(Vec2::new(-1, 0)), Some(Terrain::Obstacle));
    assert_eq!(raw.terrain_at(Vec2::new(0, -2)), Some(Terrain::Obstacle));
    assert_eq!(raw.terrain_at(Vec2::new(1, 0)), Some(Terrain::Empty));
}

#[test]
fn teammates_carry_team_label_only() {
    let config = fixture_config(1, 2);
    let world = WorldBuilder::new(config)
        .entity(0, Vec2::new(5, 5))
        .entity(0, Vec2::new(7, 5))
        .build();
    let raw = compute_percepts(&world, 0);
    let teammate: Vec<_> = raw.things_at(Vec2::new(2, 0)).collect();
    assert_eq!(teammate.len(), 1);
    assert!(matches!(&teammate[0].kind, ThingKind::Entity { team } if team == "A"));
}

#[test]
fn skip_only_step_advances_step_counter_only() {
    let config = fixture_config(1, 1);
    let mut world = WorldBuilder::new(config).entity(0, Vec2::new(5, 5)).build();
    let before_pos = world.entities[0].pos;
    let before_scores = world.scores.clone();
    let outcome = world.apply_step(&skip_all(&world)).unwrap();
    assert_eq!(world.step, 1);
    assert_eq!(world.entities[0].pos, before_pos);
    assert_eq!(world.scores, before_scores);
    assert!(outcome.actions.iter().all(|r| r.result.is_success()));
}

#[test]
fn move_drags_attachments_rigidly() {
    let config = fixture_config(1, 1);
    let mut world = WorldBuilder::new(config)
        .entity(0, Vec2::new(5, 5))
        .block(Vec2::new(5, 6), "b0", Some(0))
        .build();
    let outcome = world
        .apply_step(&act(&world, 0, ActionRequest::move_to(Direction::East)))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::Success);
    assert_eq!(world.entities[0].pos, Vec2::new(6, 5));
    assert_eq!(world.block_at(Vec2::new(6, 6)).unwrap().1.attached_to, Some(0));
}

#[test]
fn move_blocked_by_swept_obstacle() {
    let config = fixture_config(1, 1);
    let mut world = WorldBuilder::new(config)
        .entity(0, Vec2::new(5, 5))
        .block(Vec2::new(5, 6), "b0", Some(0))
        .terrain(Vec2::new(5, 7), Terrain::Obstacle)
        .build();
    let outcome = world
        .apply_step(&act(&world, 0, ActionRequest::move_to(Direction::South)))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::FailedBlocked);
    assert_eq!(world.entities[0].pos, Vec2::new(5, 5));
}

#[test]
fn move_off_edge_fails_blocked() {
    let config = fixture_config(1, 1);
    let mut world = WorldBuilder::new(config).entity(0, Vec2::new(0, 5)).build();
    let outcome = world
        .apply_step(&act(&world, 0, ActionRequest::move_to(Direction::West)))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::FailedBlocked);
}

#[test]
fn rotation_moves_attachment_and_respects_collisions() {
    let config = fixture_config(1, 1);
    let mut world = WorldBuilder::new(config)
        .entity(0, Vec2::new(5, 5))
        .block(Vec2::new(5, 6), "b0", Some(0))
        .terrain(Vec2::new(4, 5), Terrain::Obstacle)
        .build();
    // Clockwise would land the block on the obstacle at (4, 5).
    let outcome = world
        .apply_step(&act(
            &world,
            0,
            ActionRequest::Rotate {
                rotation: Rotation::Clockwise,
            },
        ))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::FailedBlocked);
    // Counter-clockwise lands it on (6, 5), which is free.
    let outcome = world
        .apply_step(&act(
            &world,
            0,
            ActionRequest::Rotate {
                rotation: Rotation::CounterClockwise,
            },
        ))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::Success);
    assert!(world.block_at(Vec2::new(6, 5)).is_some());
}

#[test]
fn request_then_attach_binds_block() {
    let config = fixture_config(1, 1);
    let mut world = WorldBuilder::new(config)
        .entity(0, Vec2::new(5, 5))
        .dispenser(Vec2::new(5, 6), "b1")
        .build();
    let outcome = world
        .apply_step(&act(
            &world,
            0,
            ActionRequest::Request {
                direction: Direction::South,
            },
        ))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::Success);
    assert!(matches!(
        outcome.actions[0].effect,
        Some(ActionEffect::Dispensed { .. })
    ));
    let outcome = world
        .apply_step(&act(
            &world,
            0,
            ActionRequest::Attach {
                direction: Direction::South,
            },
        ))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::Success);
    assert_eq!(
        world.attachments_of(0),
        vec![(Vec2::new(0, 1), BlockType::new("b1"))]
    );
    // A second request on the now-occupied dispenser is blocked.
    let outcome = world
        .apply_step(&act(
            &world,
            0,
            ActionRequest::Request {
                direction: Direction::South,
            },
        ))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::FailedBlocked);
}

#[test]
fn reciprocal_connect_fuses_chains() {
    let config = fixture_config(1, 2);
    let mut world = WorldBuilder::new(config)
        .entity(0, Vec2::new(4, 4))
        .entity(0, Vec2::new(4, 7))
        .block(Vec2::new(4, 5), "b0", Some(0))
        .block(Vec2::new(4, 6), "b1", Some(1))
        .build();
    let mut actions = skip_all(&world);
    actions[0] = ActionRequest::Connect {
        partner: 1,
        offset: Vec2::new(0, 1),
    };
    actions[1] = ActionRequest::Connect {
        partner: 0,
        offset: Vec2::new(0, -1),
    };
    let outcome = world.apply_step(&actions).unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::Success);
    assert_eq!(outcome.actions[1].result, ActionResult::Success);
    assert_eq!(world.component_of(0).len(), 2, "chains fused");
    assert_eq!(world.component_of(1).len(), 2, "shared until detach");

    // The delivering side lets go; the whole chain stays with entity 0.
    let outcome = world
        .apply_step(&act(
            &world,
            1,
            ActionRequest::Detach {
                direction: Direction::North,
            },
        ))
        .unwrap();
    assert_eq!(outcome.actions[1].result, ActionResult::Success);
    assert_eq!(world.component_of(0).len(), 2);
    assert!(world.component_of(1).is_empty());
}

#[test]
fn connect_without_reciprocity_fails_partner() {
    let config = fixture_config(1, 2);
    let mut world = WorldBuilder::new(config)
        .entity(0, Vec2::new(4, 4))
        .entity(0, Vec2::new(4, 7))
        .block(Vec2::new(4, 5), "b0", Some(0))
        .block(Vec2::new(4, 6), "b1", Some(1))
        .build();
    let outcome = world
        .apply_step(&act(
            &world,
            0,
            ActionRequest::Connect {
                partner: 1,
                offset: Vec2::new(0, 1),
            },
        ))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::FailedPartner);
    assert!(world.component_of(0).len() == 1);
}

#[test]
fn shared_component_blocks_movement_until_released() {
    let config = fixture_config(1, 2);
    let mut world = WorldBuilder::new(config)
        .entity(0, Vec2::new(4, 4))
        .entity(0, Vec2::new(4, 7))
        .block(Vec2::new(4, 5), "b0", Some(0))
        .block(Vec2::new(4, 6), "b1", Some(1))
        .build();
    let mut actions = skip_all(&world);
    actions[0] = ActionRequest::Connect {
        partner: 1,
        offset: Vec2::new(0, 1),
    };
    actions[1] = ActionRequest::Connect {
        partner: 0,
        offset: Vec2::new(0, -1),
    };
    world.apply_step(&actions).unwrap();
    let outcome = world
        .apply_step(&act(&world, 0, ActionRequest::move_to(Direction::East)))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::FailedBlocked);
}

#[test]
fn three_consecutive_clears_destroy_block() {
    let config = fixture_config(2, 1);
    let mut world = WorldBuilder::new(config)
        .goal_area(Vec2::new(8, 5), 1)
        .entity(0, Vec2::new(5, 5))
        .entity(1, Vec2::new(8, 5))
        .block(Vec2::new(8, 6), "b0", Some(1))
        .build();
    let offset = Vec2::new(3, 1); // target (8, 6), the enemy's block
    for step in 0..2 {
        let outcome = world
            .apply_step(&act(&world, 0, ActionRequest::Clear { offset }))
            .unwrap();
        assert_eq!(outcome.actions[0].result, ActionResult::Success);
        assert!(
            world.block_at(Vec2::new(8, 6)).is_some(),
            "still charging at step {step}"
        );
    }
    let outcome = world
        .apply_step(&act(&world, 0, ActionRequest::Clear { offset }))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::Success);
    let Some(ActionEffect::ClearTriggered {
        destroyed_blocks,
        victims,
        ..
    }) = &outcome.actions[0].effect
    else {
        panic!("third clear must trigger");
    };
    assert_eq!(destroyed_blocks.len(), 1);
    assert!(world.block_at(Vec2::new(8, 6)).is_none());
    // The enemy held the block while standing on goal terrain.
    assert_eq!(victims.len(), 1);
    assert_eq!(victims[0].entity, 1);
    assert!(victims[0].on_goal);
    assert!(victims[0].had_attachment);
    // Energy was spent on the trigger; regen is capped at the start value
    // while charging, so only the post-trigger tick lands.
    assert_eq!(world.entities[0].energy, 100 - 30 + 1);
}

#[test]
fn interrupted_charge_resets() {
    let config = fixture_config(1, 1);
    let mut world = WorldBuilder::new(config)
        .entity(0, Vec2::new(5, 5))
        .terrain(Vec2::new(7, 5), Terrain::Obstacle)
        .build();
    let offset = Vec2::new(2, 0);
    world
        .apply_step(&act(&world, 0, ActionRequest::Clear { offset }))
        .unwrap();
    world
        .apply_step(&act(&world, 0, ActionRequest::Skip))
        .unwrap();
    // Two more clears are not enough after the interruption.
    world
        .apply_step(&act(&world, 0, ActionRequest::Clear { offset }))
        .unwrap();
    world
        .apply_step(&act(&world, 0, ActionRequest::Clear { offset }))
        .unwrap();
    assert_eq!(world.terrain_at(Vec2::new(7, 5)), Terrain::Obstacle);
    // The third consecutive one triggers.
    world
        .apply_step(&act(&world, 0, ActionRequest::Clear { offset }))
        .unwrap();
    assert_eq!(world.terrain_at(Vec2::new(7, 5)), Terrain::Empty);
}

#[test]
fn clear_on_entity_disables_and_strips() {
    let config = fixture_config(2, 1);
    let disable = config.disable_duration;
    let mut world = WorldBuilder::new(config)
        .entity(0, Vec2::new(5, 5))
        .entity(1, Vec2::new(8, 5))
        .block(Vec2::new(8, 6), "b0", Some(1))
        .build();
    let offset = Vec2::new(3, 0); // the enemy entity's cell
    for _ in 0..3 {
        world
            .apply_step(&act(&world, 0, ActionRequest::Clear { offset }))
            .unwrap();
    }
    let trigger_step = world.step - 1;
    assert!(world.entities[1].is_disabled(world.step));
    assert_eq!(world.entities[1].disabled_until, Some(trigger_step + disable));
    assert!(world.component_of(1).is_empty(), "attachments stripped");
    // The loose block survives on the ground.
    assert!(world.block_at(Vec2::new(8, 6)).is_some());

    // Disabled entities are forced to skip until the duration passes.
    let outcome = world
        .apply_step(&act(&world, 1, ActionRequest::move_to(Direction::East)))
        .unwrap();
    assert_eq!(outcome.actions[1].request, ActionRequest::Skip);
    assert_eq!(world.entities[1].pos, Vec2::new(8, 5));
}

#[test]
fn submit_scores_consumes_and_marks() {
    let config = fixture_config(1, 1);
    let mut world = WorldBuilder::new(config)
        .goal_area(Vec2::new(5, 5), 1)
        .entity(0, Vec2::new(5, 5))
        .block(Vec2::new(5, 6), "b0", Some(0))
        .block(Vec2::new(6, 5), "b1", Some(0))
        .task(
            "task0",
            50,
            10,
            vec![Requirement::new(0, 1, "b0")],
        )
        .build();
    // Superset match: the extra b1 attachment is tolerated.
    let outcome = world
        .apply_step(&act(
            &world,
            0,
            ActionRequest::Submit {
                task: "task0".into(),
            },
        ))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::Success);
    let Some(ActionEffect::Submitted {
        reward, consumed, ..
    }) = &outcome.actions[0].effect
    else {
        panic!("submit effect expected");
    };
    assert_eq!(*reward, 10);
    assert_eq!(consumed.len(), 1);
    assert_eq!(world.scores[0], 10);
    assert!(world.block_at(Vec2::new(5, 6)).is_none(), "pattern consumed");
    assert!(world.block_at(Vec2::new(6, 5)).is_some(), "extras kept");
    assert_eq!(world.task("task0").unwrap().submitted_by, Some(0));

    // Submitting again fails: already submitted.
    let outcome = world
        .apply_step(&act(
            &world,
            0,
            ActionRequest::Submit {
                task: "task0".into(),
            },
        ))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::FailedTarget);
}

#[test]
fn submit_requires_goal_terrain_and_deadline() {
    let config = fixture_config(1, 1);
    let mut world = WorldBuilder::new(config)
        .goal_area(Vec2::new(9, 9), 1)
        .entity(0, Vec2::new(5, 5))
        .block(Vec2::new(5, 6), "b0", Some(0))
        .task("task0", 0, 10, vec![Requirement::new(0, 1, "b0")])
        .build();
    // Not on goal terrain.
    let outcome = world
        .apply_step(&act(
            &world,
            0,
            ActionRequest::Submit {
                task: "task0".into(),
            },
        ))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::FailedTarget);
    // Deadline (0) has now passed at step 1 even on goal terrain.
    let mut world2 = WorldBuilder::new(fixture_config(1, 1))
        .goal_area(Vec2::new(5, 5), 1)
        .entity(0, Vec2::new(5, 5))
        .block(Vec2::new(5, 6), "b0", Some(0))
        .task("task0", 0, 10, vec![Requirement::new(0, 1, "b0")])
        .build();
    world2.apply_step(&skip_all(&world2)).unwrap();
    let outcome = world2
        .apply_step(&act(
            &world2,
            0,
            ActionRequest::Submit {
                task: "task0".into(),
            },
        ))
        .unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::FailedDeadline);
    assert_eq!(world2.scores[0], 0);
}

#[test]
fn movement_conflict_resolved_by_ascending_id() {
    let config = fixture_config(1, 2);
    let mut world = WorldBuilder::new(config)
        .entity(0, Vec2::new(4, 5))
        .entity(0, Vec2::new(6, 5))
        .build();
    let mut actions = skip_all(&world);
    actions[0] = ActionRequest::move_to(Direction::East);
    actions[1] = ActionRequest::move_to(Direction::West);
    let outcome = world.apply_step(&actions).unwrap();
    assert_eq!(outcome.actions[0].result, ActionResult::Success);
    assert_eq!(outcome.actions[1].result, ActionResult::FailedBlocked);
    assert_eq!(world.entities[0].pos, Vec2::new(5, 5));
    assert_eq!(world.entities[1].pos, Vec2::new(6, 5));
}

#[test]
fn clear_event_wipes_area_and_regenerates_obstacles() {
    let mut config = fixture_config(2, 1);
    config.regen_obstacles = 2;
    let mut world = WorldBuilder::new(config)
        .entity(0, Vec2::new(5, 5))
        .entity(1, Vec2::new(9, 9))
        .block(Vec2::new(5, 6), "b0", Some(0))
        .terrain(Vec2::new(4, 5), Terrain::Obstacle)
        .build();
    world.pending_events.push(ClearEvent {
        center: Vec2::new(5, 5),
        radius: 2,
        trigger_step: 0,
    });
    let outcome = world.apply_step(&skip_all(&world)).unwrap();
    assert_eq!(outcome.events.len(), 1);
    let event = &outcome.events[0];
    assert_eq!(event.destroyed_blocks.len(), 1);
    assert_eq!(event.disabled_entities, vec![0]);
    assert!(world.entities[0].is_disabled(world.step));
    assert!(!world.entities[1].is_disabled(world.step));
    assert!(world.block_at(Vec2::new(5, 6)).is_none());
    assert_eq!(event.regenerated.len(), 2);
    for cell in &event.regenerated {
        assert_eq!(world.terrain_at(*cell), Terrain::Obstacle);
    }
}

#[test]
fn vision_soundness_spot_check() {
    // Every percept corresponds to true world content.
    let config = SimConfig::default();
    let mut world = generate_world(&config).unwrap();
    for _ in 0..3 {
        let actions: Vec<ActionRequest> = (0..world.entities.len())
            .map(|i| {
                if i % 2 == 0 {
                    ActionRequest::move_to(Direction::East)
                } else {
                    ActionRequest::Skip
                }
            })
            .collect();
        world.apply_step(&actions).unwrap();
    }
    for entity in 0..world.entities.len() {
        let raw = compute_percepts(&world, entity);
        let origin = world.entities[entity].pos;
        for (rel, terrain) in &raw.terrain {
            assert_eq!(*terrain, world.terrain_at(origin + *rel));
        }
        for thing in &raw.things {
            let cell = origin + thing.rel;
            match &thing.kind {
                ThingKind::Entity { team } => {
                    let e = world.entity_at(cell).expect("entity percept is real");
                    assert_eq!(team, &crate::config::team_name(e.team));
                }
                ThingKind::Block { block_type } => {
                    let (_, b) = world.block_at(cell).expect("block percept is real");
                    assert_eq!(block_type, &b.block_type);
                }
                ThingKind::Dispenser { block_type } => {
                    assert_eq!(world.dispenser_at(cell), Some(block_type));
                }
            }
        }
    }
}

#[test]
fn engine_rejects_malformed_action_sets() {
    let config = fixture_config(1, 2);
    let mut world = WorldBuilder::new(config)
        .entity(0, Vec2::new(4, 5))
        .entity(0, Vec2::new(6, 5))
        .build();
    assert!(matches!(
        world.apply_step(&[ActionRequest::Skip]),
        Err(EngineError::MalformedActions { .. })
    ));
}
