//! Requirement sequencing, sub-team formation, task assignment and
//! assignment monitoring — the operator's toolbox.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::sim::{Requirement, TaskSpec};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("no requirement at (0, 1)")]
    MissingRoot,
    #[error("duplicate requirement cell {0}")]
    DuplicateCell(Vec2),
    #[error("requirement walk cannot consume all cells")]
    Unplannable,
}

/// Order task requirements so a sequential build works: start at (0, 1),
/// then repeatedly take an unvisited east, else west, else south neighbour
/// of the current requirement. When the scan is exhausted but requirements
/// remain, backtrack to the most recent requirement that still has an
/// unvisited neighbour. The result is a permutation of the input where each
/// entry is adjacent to an earlier one (or to the agent cell for the root).
pub fn plan_requirements(reqs: &[Requirement]) -> Result<Vec<Requirement>, PlanError> {
    let mut by_cell: BTreeMap<Vec2, &Requirement> = BTreeMap::new();
    for r in reqs {
        if by_cell.insert(r.offset(), r).is_some() {
            return Err(PlanError::DuplicateCell(r.offset()));
        }
    }
    let root = Vec2::new(0, 1);
    if !by_cell.contains_key(&root) {
        return Err(PlanError::MissingRoot);
    }

    let scan = [Vec2::new(1, 0), Vec2::new(-1, 0), Vec2::new(0, 1)]; // E, W, S
    let mut visited = BTreeSet::from([root]);
    let mut stack = vec![root];
    let mut seq = vec![by_cell[&root].clone()];
    while seq.len() < reqs.len() {
        let Some(&current) = stack.last() else {
            return Err(PlanError::Unplannable);
        };
        let next = scan
            .iter()
            .map(|d| current + *d)
            .find(|c| by_cell.contains_key(c) && !visited.contains(c));
        match next {
            Some(cell) => {
                visited.insert(cell);
                seq.push(by_cell[&cell].clone());
                stack.push(cell);
            }
            None => {
                stack.pop();
            }
        }
    }
    Ok(seq)
}

/// One agent's share of a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskAssignment {
    pub agent: String,
    pub task: String,
    pub req: Requirement,
}

/// The master builder is whoever holds the (0, 1) requirement.
pub fn is_master(assignment: &TaskAssignment) -> bool {
    assignment.req.offset() == Vec2::new(0, 1)
}

/// Partition free agents into sub-teams where every pair is mutually
/// identified: repeatedly extract a maximum clique of the identification
/// graph (ties by lexicographic member list), singletons allowed.
pub fn form_subteams(
    free_agents: &[String],
    identified: &BTreeMap<String, BTreeSet<String>>,
) -> Vec<Vec<String>> {
    let mut remaining: Vec<String> = free_agents.to_vec();
    remaining.sort();
    remaining.dedup();
    let mut teams = Vec::new();
    while !remaining.is_empty() {
        let clique = max_clique(&remaining, identified);
        remaining.retain(|a| !clique.contains(a));
        teams.push(clique);
    }
    teams
}

/// Exact maximum clique by recursive enumeration; team sizes are tiny.
fn max_clique(agents: &[String], identified: &BTreeMap<String, BTreeSet<String>>) -> Vec<String> {
    let connected = |a: &String, b: &String| {
        identified.get(a).is_some_and(|s| s.contains(b))
            && identified.get(b).is_some_and(|s| s.contains(a))
    };
    let mut best: Vec<String> = Vec::new();
    let mut current: Vec<String> = Vec::new();

    fn recurse(
        agents: &[String],
        start: usize,
        connected: &impl Fn(&String, &String) -> bool,
        current: &mut Vec<String>,
        best: &mut Vec<String>,
    ) {
        if current.len() > best.len() {
            *best = current.clone();
        }
        for i in start..agents.len() {
            let cand = &agents[i];
            if current.iter().all(|m| connected(m, cand)) {
                current.push(cand.clone());
                recurse(agents, i + 1, connected, current, best);
                current.pop();
            }
        }
    }
    recurse(agents, 0, &connected, &mut current, &mut best);
    // Enumeration visits member lists in lexicographic order and only
    // replaces on strictly larger size, so ties keep the smallest list.
    best
}

/// Pick and split tasks across sub-teams. A task is feasible for a team when
/// it is unsubmitted, leaves at least `min_slack` steps before its deadline,
/// has no more requirements than members, and is plannable. Teams prefer
/// more requirements, then later deadlines, then the larger name.
/// Requirements are handed out in plan order to members sorted by name;
/// members beyond the requirement count stay free.
pub fn assign_tasks(
    subteams: &[Vec<String>],
    tasks: &[TaskSpec],
    step: u64,
    min_slack: u64,
    excluded: &BTreeSet<String>,
) -> Vec<TaskAssignment> {
    let mut taken: BTreeSet<String> = excluded.clone();
    let mut assignments = Vec::new();
    for team in subteams {
        let mut members = team.clone();
        members.sort();
        let mut candidates: Vec<(&TaskSpec, Vec<Requirement>)> = tasks
            .iter()
            .filter(|t| {
                t.submitted_by.is_none()
                    && !taken.contains(&t.name)
                    && t.deadline >= step + min_slack
                    && t.requirements.len() <= members.len()
            })
            .filter_map(|t| plan_requirements(&t.requirements).ok().map(|p| (t, p)))
            .collect();
        candidates.sort_by(|(a, _), (b, _)| {
            (a.requirements.len(), a.deadline, &a.name)
                .cmp(&(b.requirements.len(), b.deadline, &b.name))
        });
        if let Some((task, plan)) = candidates.pop() {
            taken.insert(task.name.clone());
            for (member, req) in members.iter().zip(plan.iter()) {
                assignments.push(TaskAssignment {
                    agent: member.clone(),
                    task: task.name.clone(),
                    req: req.clone(),
                });
            }
        }
    }
    assignments
}

/// Split current assignments into kept and cancelled. An assignment dies
/// when its task expired, was submitted by anyone, or vanished from the
/// task list; the whole sub-team of a cancelled task is freed together.
pub fn monitor_assignments(
    assignments: &[TaskAssignment],
    tasks: &[TaskSpec],
    step: u64,
) -> (Vec<TaskAssignment>, Vec<TaskAssignment>) {
    let invalid: BTreeSet<String> = assignments
        .iter()
        .map(|a| a.task.clone())
        .filter(|name| match tasks.iter().find(|t| &t.name == name) {
            Some(t) => t.expired(step) || t.submitted_by.is_some(),
            None => true,
        })
        .collect();
    assignments
        .iter()
        .cloned()
        .partition(|a| !invalid.contains(&a.task))
}
