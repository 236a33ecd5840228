//! Match metrics computed from a replay trace.
//!
//! Block identities recorded in the trace make the attribution exact: an
//! attachment is "used" when the block it bound ends up consumed by a
//! successful submit, connects are tied to tasks through the consumed
//! block sets, and timing metrics fall out of the recorded step numbers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::Message;
use crate::sim::{ActionEffect, ActionRequest, BlockId};

use super::trace::{ReplayTrace, TaskEvent};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("malformed trace: {0}")]
    Malformed(String),
}

/// Why a failed submission counts as failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    /// A submit action was attempted after the deadline.
    Deadline,
    /// A submit action failed for another reason (pattern, terrain, race).
    Rejected,
    /// All requirements were connected but no submit ever succeeded.
    NeverSubmitted,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TeamMetrics {
    pub score: u64,
    pub attachments_obtained: u64,
    pub attachments_used: u64,
    pub connections_made: u64,
    pub submitted_tasks: u64,
    pub failed_submissions: u64,
    pub failed_submission_causes: BTreeMap<FailureCause, u64>,
    pub first_task_start_time: Option<u64>,
    pub avg_task_requirement_size: Option<f64>,
    pub avg_completion_per_requirement: Option<f64>,
    pub avg_attach_to_connect: Option<f64>,
    pub avg_last_connect_to_submit: Option<f64>,
    pub opponent_rejected_submissions: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub steps: u64,
    pub teams: BTreeMap<String, TeamMetrics>,
}

struct SubmittedTask {
    step: u64,
    requirement_count: usize,
    consumed: Vec<BlockId>,
}

pub fn compute_metrics(trace: &ReplayTrace) -> Result<MetricsReport, MetricsError> {
    let config = &trace.header.config;
    let mut report = MetricsReport {
        steps: trace.records.len() as u64,
        ..Default::default()
    };

    let team_of = |name: &str| -> Result<String, MetricsError> {
        let entity = crate::config::entity_of_name(config, name)
            .ok_or_else(|| MetricsError::Malformed(format!("unknown agent {name}")))?;
        let (team, _) = crate::config::team_slot(config, entity);
        Ok(crate::config::team_name(team))
    };

    // Pass 1: harvest events with block identities.
    let mut attaches: Vec<(String, u64, BlockId)> = Vec::new(); // team, step, block
    let mut connects: Vec<(String, u64, BlockId, BlockId)> = Vec::new();
    let mut submissions: BTreeMap<String, Vec<SubmittedTask>> = BTreeMap::new();
    let mut failed_submit_actions: BTreeMap<(String, String), FailureCause> = BTreeMap::new();
    let mut task_reqs: BTreeMap<String, usize> = BTreeMap::new();
    let mut connect_done: BTreeMap<(String, String), u64> = BTreeMap::new();

    for record in &trace.records {
        for event in &record.task_events {
            if let TaskEvent::Created { task } = event {
                task_reqs.insert(task.name.clone(), task.requirements.len());
            }
        }
        for env in &record.messages {
            if let Message::ConnectDone { task } = &env.body {
                let team = team_of(&env.from)?;
                *connect_done.entry((team, task.clone())).or_default() += 1;
            }
        }
        for (name, action) in &record.actions {
            let team = team_of(name)?;
            let metrics = report.teams.entry(team.clone()).or_default();
            match (&action.request, &action.effect) {
                (_, Some(ActionEffect::Attached { block })) => {
                    metrics.attachments_obtained += 1;
                    attaches.push((team.clone(), record.step, *block));
                }
                (_, Some(ActionEffect::Connected {
                    own_block,
                    partner_block,
                    partner,
                })) => {
                    // Each successful reciprocal pair shows up on both
                    // entities; count it once from the lower entity id.
                    let own_entity = crate::config::entity_of_name(config, name)
                        .ok_or_else(|| MetricsError::Malformed(format!("unknown agent {name}")))?;
                    if own_entity < *partner {
                        metrics.connections_made += 1;
                        connects.push((team.clone(), record.step, *own_block, *partner_block));
                    }
                }
                (_, Some(ActionEffect::Submitted { task, consumed, .. })) => {
                    metrics.submitted_tasks += 1;
                    submissions.entry(team.clone()).or_default().push(SubmittedTask {
                        step: record.step,
                        requirement_count: task_reqs.get(task).copied().unwrap_or(consumed.len()),
                        consumed: consumed.clone(),
                    });
                }
                (_, Some(ActionEffect::ClearTriggered { victims, .. })) => {
                    let rejected = victims
                        .iter()
                        .any(|v| {
                            crate::config::team_name(v.team) != team
                                && v.on_goal
                                && v.had_attachment
                        });
                    if rejected {
                        metrics.opponent_rejected_submissions += 1;
                    }
                }
                (ActionRequest::Submit { task }, None) => {
                    let cause = match action.result {
                        crate::sim::ActionResult::FailedDeadline => FailureCause::Deadline,
                        _ => FailureCause::Rejected,
                    };
                    failed_submit_actions
                        .entry((team.clone(), task.clone()))
                        .or_insert(cause);
                }
                _ => {}
            }
        }
        for (team_label, score) in &record.scores {
            report.teams.entry(team_label.clone()).or_default().score = *score;
        }
    }
    for team in 0..config.teams {
        report
            .teams
            .entry(crate::config::team_name(team))
            .or_default();
    }

    // Pass 2: derived metrics per team.
    for (team_label, metrics) in report.teams.iter_mut() {
        let submitted = submissions.remove(team_label).unwrap_or_default();
        let used: BTreeSet<BlockId> = submitted.iter().flat_map(|s| s.consumed.clone()).collect();
        let submitted_tasks_named: BTreeSet<String> = trace
            .records
            .iter()
            .flat_map(|r| &r.task_events)
            .filter_map(|e| match e {
                TaskEvent::Submitted { task, team, .. } if team == team_label => {
                    Some(task.clone())
                }
                _ => None,
            })
            .collect();

        // Used = attach events whose block was eventually consumed.
        metrics.attachments_used = attaches
            .iter()
            .filter(|(t, _, b)| t == team_label && used.contains(b))
            .count() as u64;

        // Last attach step per block, for attach-to-connect timing.
        let attach_step = |block: BlockId, before: u64| -> Option<u64> {
            attaches
                .iter()
                .filter(|(t, s, b)| t == team_label && *b == block && *s <= before)
                .map(|(_, s, _)| *s)
                .max()
        };

        // Attach-to-connect over used blocks of successful connects.
        let mut attach_to_connect: Vec<f64> = Vec::new();
        for (_, step, a, b) in connects.iter().filter(|(t, ..)| t == team_label) {
            for block in [a, b] {
                if used.contains(block) {
                    if let Some(at) = attach_step(*block, *step) {
                        attach_to_connect.push((*step - at) as f64);
                    }
                }
            }
        }

        // Per submitted task: completion time and last connect.
        let mut completion: Vec<f64> = Vec::new();
        let mut last_connect_to_submit: Vec<f64> = Vec::new();
        let mut first_start: Option<u64> = None;
        for sub in &submitted {
            let consumed: BTreeSet<BlockId> = sub.consumed.iter().copied().collect();
            let first_attach = attaches
                .iter()
                .filter(|(t, s, b)| t == team_label && consumed.contains(b) && *s <= sub.step)
                .map(|(_, s, _)| *s)
                .min();
            if let Some(first) = first_attach {
                if sub.requirement_count > 0 {
                    completion.push((sub.step - first) as f64 / sub.requirement_count as f64);
                }
                if first_start.is_none() {
                    first_start = Some(first);
                }
            }
            let last_connect = connects
                .iter()
                .filter(|(t, s, a, b)| {
                    t == team_label
                        && *s <= sub.step
                        && (consumed.contains(a) || consumed.contains(b))
                })
                .map(|(_, s, _, _)| *s)
                .max();
            if let Some(lc) = last_connect {
                last_connect_to_submit.push((sub.step - lc) as f64);
            }
        }

        // Failed submissions: failed submit actions, plus fully-connected
        // tasks that never made it in.
        let mut failed: BTreeMap<String, FailureCause> = failed_submit_actions
            .iter()
            .filter(|((t, task), _)| t == team_label && !submitted_tasks_named.contains(task))
            .map(|((_, task), cause)| (task.clone(), *cause))
            .collect();
        for ((t, task), count) in &connect_done {
            if t != team_label || submitted_tasks_named.contains(task) {
                continue;
            }
            let reqs = task_reqs.get(task).copied().unwrap_or(usize::MAX);
            if reqs >= 1 && *count as usize >= reqs.saturating_sub(1) && reqs > 1 {
                failed.entry(task.clone()).or_insert(FailureCause::NeverSubmitted);
            }
        }
        metrics.failed_submissions = failed.len() as u64;
        for cause in failed.values() {
            *metrics.failed_submission_causes.entry(*cause).or_default() += 1;
        }

        metrics.first_task_start_time = first_start;
        metrics.avg_task_requirement_size = mean(
            &submitted
                .iter()
                .map(|s| s.requirement_count as f64)
                .collect::<Vec<_>>(),
        );
        metrics.avg_completion_per_requirement = mean(&completion);
        metrics.avg_attach_to_connect = mean(&attach_to_connect);
        metrics.avg_last_connect_to_submit = mean(&last_connect_to_submit);
    }

    Ok(report)
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Plain-text table mirroring the usual per-simulation metrics block:
/// score first, ten metrics below, absent values greyed out as `-`.
pub fn format_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    let teams: Vec<&String> = report.teams.keys().collect();
    let fmt_opt_u64 = |v: Option<u64>| v.map_or("-".to_string(), |x| x.to_string());
    let fmt_opt_f64 = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));

    out.push_str(&format!("{:<42}", "Metric"));
    for t in &teams {
        out.push_str(&format!("{:>12}", format!("Team {t}")));
    }
    out.push('\n');
    let mut row = |label: &str, values: Vec<String>| {
        out.push_str(&format!("{label:<42}"));
        for v in values {
            out.push_str(&format!("{v:>12}"));
        }
        out.push('\n');
    };
    let col = |f: &dyn Fn(&TeamMetrics) -> String| -> Vec<String> {
        teams.iter().map(|t| f(&report.teams[*t])).collect()
    };
    row("Score", col(&|m| m.score.to_string()));
    row(
        "Attachment Utilization (Used/Obtained)",
        col(&|m| format!("{} / {}", m.attachments_used, m.attachments_obtained)),
    );
    row("Number of Connections Made", col(&|m| m.connections_made.to_string()));
    row("Submitted Tasks", col(&|m| m.submitted_tasks.to_string()));
    row("Failed Submissions", col(&|m| m.failed_submissions.to_string()));
    row(
        "First Task Start Time",
        col(&|m| fmt_opt_u64(m.first_task_start_time)),
    );
    row(
        "Avg. Task Requirement Size",
        col(&|m| fmt_opt_f64(m.avg_task_requirement_size)),
    );
    row(
        "Avg. Task Completion Time (Per Req.)",
        col(&|m| fmt_opt_f64(m.avg_completion_per_requirement)),
    );
    row(
        "Avg. Attach to Connect Time",
        col(&|m| fmt_opt_f64(m.avg_attach_to_connect)),
    );
    row(
        "Avg. Last Connect to Submit Time",
        col(&|m| fmt_opt_f64(m.avg_last_connect_to_submit)),
    );
    row(
        "Opponent Rejected Submissions",
        col(&|m| m.opponent_rejected_submissions.to_string()),
    );
    out
}
