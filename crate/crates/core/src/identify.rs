//! Operator-side pairwise agent identification.
//!
//! Agents cannot see who a perceived teammate is, only where. When two
//! teammates see each other they both report the sighting; the operator
//! pairs reports whose offsets are exact opposites. If more than one pair
//! shares an offset the whole group is discarded for the step — soundness
//! over liveness. A confirmed pair yields a translation vector between the
//! two virtual frames, permanent for the rest of the match.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;

/// One broadcast: `reporter` saw a teammate at `offset` this step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SightingReport {
    pub reporter: String,
    pub step: u64,
    pub offset: Vec2,
}

/// Maps points from a peer's virtual frame into the owner's frame:
/// `point_in_peer_frame + delta = point_in_owner_frame`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Translation {
    pub delta: Vec2,
}

impl Translation {
    pub fn new(delta: Vec2) -> Self {
        Translation { delta }
    }

    pub fn apply(self, point: Vec2) -> Vec2 {
        point + self.delta
    }

    pub fn inverse(self) -> Translation {
        Translation { delta: -self.delta }
    }

    /// Compose: peer-of-peer frame into owner frame.
    pub fn then(self, outer: Translation) -> Translation {
        Translation {
            delta: self.delta + outer.delta,
        }
    }
}

/// A resolved mutual sighting: `a` saw `b` at `a_offset` (a < b by name).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairedSighting {
    pub a: String,
    pub a_offset: Vec2,
    pub b: String,
}

/// Pair same-step sighting reports by opposite offsets. Groups where either
/// side has more than one candidate are aborted wholesale.
type OffsetGroup<'a> = (Vec<&'a SightingReport>, Vec<&'a SightingReport>);

pub fn pair_reports(reports: &[SightingReport]) -> Vec<PairedSighting> {
    debug_assert!(reports.windows(2).all(|w| w[0].step == w[1].step));
    // Group by the unordered offset pair {v, -v}.
    let mut groups: BTreeMap<(Vec2, Vec2), OffsetGroup> = BTreeMap::new();
    for report in reports {
        let v = report.offset;
        let key = if v < -v { (v, -v) } else { (-v, v) };
        let entry = groups.entry(key).or_default();
        if v == key.0 {
            entry.0.push(report);
        } else {
            entry.1.push(report);
        }
    }
    let mut pairs = Vec::new();
    for (_, (side_a, side_b)) in groups {
        if side_a.len() == 1 && side_b.len() == 1 {
            let (first, second) = (side_a[0], side_b[0]);
            let (a, b) = if first.reporter <= second.reporter {
                (first, second)
            } else {
                (second, first)
            };
            pairs.push(PairedSighting {
                a: a.reporter.clone(),
                a_offset: a.offset,
                b: b.reporter.clone(),
            });
        }
        // Any other multiplicity is ambiguous: the operator abandons the
        // whole group for this step.
    }
    pairs
}

/// Translation from B's frame into A's frame, given A's own virtual
/// position, the offset at which A saw B, and B's own virtual position.
pub fn compute_translation(a_pos: Vec2, a_offset: Vec2, b_pos: Vec2) -> Translation {
    Translation {
        delta: a_pos + a_offset - b_pos,
    }
}
