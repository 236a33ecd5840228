//! Deterministic multi-agent grid-world simulator and agent runtime.
//!
//! The crate is split along the step pipeline:
//!
//! - [`sim`] — the authoritative scenario engine (world, actions, percepts);
//! - [`pipeline`] — step-synchronized percept ingestion into agent containers;
//! - [`map`] — per-agent map models, path-finding and exploration;
//! - [`identify`] — operator-side pairwise agent identification;
//! - [`attach`] — per-agent attachment bookkeeping;
//! - [`plan`] — requirement ordering, sub-team formation, task assignment;
//! - [`behavior`] — builder/attacker decision state machines;
//! - [`harness`] — match runner, replay traces, metrics and rendering.
//!
//! Everything is deterministic: a config (and nothing else) decides a match.

pub mod attach;
pub mod behavior;
pub mod config;
pub mod geom;
pub mod harness;
pub mod identify;
pub mod map;
pub mod pipeline;
pub mod plan;
pub mod rng;
pub mod sim;
