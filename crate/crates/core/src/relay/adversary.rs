//! Exact recoverability of relayed secrets by a coalition of satellites.
//!
//! Each segment secret and each link key is an independent unknown. The
//! adversary sees every forwarded message and every key held by a
//! compromised satellite; it learns the secret exactly when the secret's
//! coefficient vector lies in the GF(2) span of what it holds. Segments and
//! rings use disjoint unknowns, so each is decided on its own.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use super::gf2::{BitVec, Span};
use super::{KeyId, RelayError, Result, RingPath, Segment};
use crate::geometry::{has_line_of_sight, ConstellationSpec, Vec3};
use crate::linkbudget::{isl_efficiency, to_db, OpticalParams};

/// Satellites in the adversary's hands, listed per ring.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CompromiseScenario {
    pub compromised: Vec<BTreeSet<usize>>,
}

impl CompromiseScenario {
    /// The same satellites compromised in every one of `n_rings` rings.
    pub fn uniform(sats: &[usize], n_rings: usize) -> Self {
        CompromiseScenario {
            compromised: vec![sats.iter().copied().collect(); n_rings],
        }
    }

    pub fn single_ring(sats: &[usize]) -> Self {
        Self::uniform(sats, 1)
    }

    pub fn size(&self) -> usize {
        self.compromised.iter().map(|s| s.len()).sum()
    }
}

/// One item of adversary knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Knowledge {
    /// Message leaving position `hop`.
    Message {
        ring: usize,
        segment: Segment,
        hop: usize,
    },
    Key(KeyId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentVerdict {
    pub ring: usize,
    pub segment: Segment,
    pub recoverable: bool,
    /// Items whose XOR equals the segment secret.
    pub witness: Option<Vec<Knowledge>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    /// True when the final key (XOR of all segment secrets) is exposed.
    pub recoverable: bool,
    pub segments: Vec<SegmentVerdict>,
}

impl Verdict {
    pub fn segment(&self, ring: usize, segment: Segment) -> Option<&SegmentVerdict> {
        self.segments
            .iter()
            .find(|s| s.ring == ring && s.segment == segment)
    }

    /// Witness for the final key: the union of all segment witnesses.
    pub fn witness(&self) -> Option<Vec<Knowledge>> {
        if !self.recoverable {
            return None;
        }
        let mut all: Vec<Knowledge> = self
            .segments
            .iter()
            .flat_map(|s| s.witness.clone().unwrap_or_default())
            .collect();
        all.sort();
        Some(all)
    }
}

fn decide_segment(
    path: &RingPath,
    ring: usize,
    segment: Segment,
    compromised: &BTreeSet<usize>,
) -> SegmentVerdict {
    let edges = path.edges(segment);
    let bob = path.bob_position(segment);
    let width = 1 + edges.len();
    let mut span = Span::new(width);
    let mut items = Vec::new();

    for p in 0..bob {
        let mut row = BitVec::unit(width, 0);
        for (j, e) in edges.iter().enumerate() {
            if e.crosses(p) {
                row.set(1 + j, true);
            }
        }
        span.push(row);
        items.push(Knowledge::Message { ring, segment, hop: p });
    }

    let bad: BTreeSet<usize> = compromised
        .iter()
        .filter_map(|s| path.position_of(segment, *s))
        .collect();
    for (j, e) in edges.iter().enumerate() {
        if bad.contains(&e.from) || bad.contains(&e.to) {
            span.push(BitVec::unit(width, 1 + j));
            items.push(Knowledge::Key(KeyId {
                ring,
                segment,
                from: e.from,
                to: e.to,
            }));
        }
    }

    let witness = span
        .express(&BitVec::unit(width, 0))
        .map(|combo| combo.into_iter().map(|i| items[i]).collect::<Vec<_>>());
    SegmentVerdict {
        ring,
        segment,
        recoverable: witness.is_some(),
        witness,
    }
}

/// Decide whether the compromised satellites can reconstruct the final key.
pub fn adversary_can_recover(path: &RingPath, scenario: &CompromiseScenario) -> Result<Verdict> {
    if scenario.compromised.len() != path.n_rings {
        return Err(RelayError::RingCount {
            got: scenario.compromised.len(),
            expected: path.n_rings,
        });
    }
    for set in &scenario.compromised {
        if let Some(&index) = set.iter().find(|s| **s >= path.n_sats) {
            return Err(RelayError::BadIndex {
                index,
                n_sats: path.n_sats,
            });
        }
    }
    let mut segments = Vec::with_capacity(2 * path.n_rings);
    for (ring, set) in scenario.compromised.iter().enumerate() {
        for segment in Segment::BOTH {
            segments.push(decide_segment(path, ring, segment, set));
        }
    }
    let recoverable = segments.iter().all(|s| s.recoverable);
    Ok(Verdict {
        recoverable,
        segments,
    })
}

/// What the adversary is trying to learn in [`min_compromise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryTarget {
    /// A single segment secret of one ring.
    Segment(Segment),
    /// The final key, which needs every segment of every ring.
    FinalKey,
}

/// Result of a minimum-coalition search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinCompromise {
    /// Certified lower bound on the coalition size (summed over rings).
    pub lower: usize,
    /// Size of the best recovering coalition found (summed over rings).
    pub upper: usize,
    /// Per-ring recovering coalition; lexicographically smallest when exact.
    pub example: Vec<BTreeSet<usize>>,
    pub evaluations: usize,
}

impl MinCompromise {
    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

fn ring_recovers(path: &RingPath, set: &BTreeSet<usize>, target: RecoveryTarget) -> bool {
    match target {
        RecoveryTarget::Segment(seg) => decide_segment(path, 0, seg, set).recoverable,
        RecoveryTarget::FinalKey => {
            Segment::BOTH
                .iter()
                .all(|seg| decide_segment(path, 0, *seg, set).recoverable)
        }
    }
}

/// Advance `idx` to the next k-combination of 0..n in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Smallest coalition that recovers `target`.
///
/// Candidate sets are scanned by size and then lexicographically, so the
/// first hit is the lexicographically smallest minimum. Rings carry
/// independent keys over the same geometry; the total is the per-ring
/// minimum times the ring count. When `budget` subset checks run out, the
/// result is a bracket: every smaller size has been ruled out and the upper
/// end is a verified recovering coalition.
pub fn min_compromise(
    path: &RingPath,
    target: RecoveryTarget,
    allow_attachments: bool,
    budget: usize,
) -> MinCompromise {
    let candidates: Vec<usize> = {
        let mut all: BTreeSet<usize> = path.segment_plus.iter().copied().collect();
        all.extend(path.segment_minus.iter().copied());
        all.into_iter()
            .filter(|s| allow_attachments || (*s != path.attach_a && *s != path.attach_b))
            .collect()
    };
    let n = candidates.len();
    let mut evaluations = 0usize;
    let mut lower = 0usize;

    'sizes: for k in 1..=n {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            if evaluations >= budget {
                break 'sizes;
            }
            evaluations += 1;
            let set: BTreeSet<usize> = idx.iter().map(|i| candidates[*i]).collect();
            if ring_recovers(path, &set, target) {
                return MinCompromise {
                    lower: k * path.n_rings,
                    upper: k * path.n_rings,
                    example: vec![set; path.n_rings],
                    evaluations,
                };
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
        lower = k;
    }

    let fallback = constructive_coalition(path, target, allow_attachments, &candidates);
    let (upper, example) = match fallback {
        Some(set) => (set.len(), set),
        None => (usize::MAX, BTreeSet::new()),
    };
    let lower = if budget > evaluations { usize::MAX } else { lower + 1 };
    MinCompromise {
        lower: lower.saturating_mul(path.n_rings).min(upper.saturating_mul(path.n_rings)),
        upper: upper.saturating_mul(path.n_rings),
        example: vec![example; path.n_rings],
        evaluations,
    }
}

/// A recovering coalition built from runs of `r` consecutive satellites.
fn constructive_coalition(
    path: &RingPath,
    target: RecoveryTarget,
    allow_attachments: bool,
    candidates: &[usize],
) -> Option<BTreeSet<usize>> {
    let r = path.neighbor_range;
    let run = |seg: Segment| -> Vec<usize> {
        let sats = path.satellites(seg);
        let start = if allow_attachments { 0 } else { 1 };
        sats.iter().skip(start).take(r).copied().collect()
    };
    let mut set = BTreeSet::new();
    match target {
        RecoveryTarget::Segment(seg) => set.extend(run(seg)),
        RecoveryTarget::FinalKey => {
            set.extend(run(Segment::Plus));
            set.extend(run(Segment::Minus));
        }
    }
    if ring_recovers(path, &set, target) {
        return Some(set);
    }
    let all: BTreeSet<usize> = candidates.iter().copied().collect();
    ring_recovers(path, &all, target).then_some(all)
}

/// Largest neighbour range `r` whose `r`-hop chord keeps line of sight above
/// the atmosphere shell and an ISL loss within `budget_db`.
///
/// Returns 1 when even the two-hop chord fails either test.
pub fn feasible_neighbor_range(
    spec: &ConstellationSpec,
    params: &OpticalParams,
    budget_db: f64,
) -> Result<usize> {
    let n = spec.num_sats;
    if n < 3 {
        return Err(RelayError::RingTooSmall(n));
    }
    let radius = spec.orbit_radius_km();
    let mut best = 1;
    for r in 2..=n / 2 {
        let angle = 2.0 * PI * r as f64 / n as f64;
        let a = Vec3::new(radius, 0.0, 0.0);
        let b = Vec3::new(radius * angle.cos(), radius * angle.sin(), 0.0);
        let los = has_line_of_sight(spec, a, b)
            .map_err(|e| RelayError::LinkBudget(e.to_string()))?;
        let chord_m = b.sub(a).norm() * 1e3;
        let eta = isl_efficiency(chord_m, params).map_err(|e| RelayError::LinkBudget(e.to_string()))?;
        if los && to_db(eta) <= budget_db {
            best = r;
        } else {
            break;
        }
    }
    Ok(best)
}
