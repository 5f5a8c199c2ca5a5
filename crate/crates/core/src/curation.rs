//! Note reuse and rater attention: claim matching, bounded adaptation,
//! farthest-point prescreening and greedy capacity-constrained allocation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{NoteId, PostId, RaterId};
use crate::math::{dot, euclidean, norm};
use crate::writers::{NoteVector, Post};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CurationError {
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("vectors have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("invalid match thresholds: adapt threshold must not exceed reuse threshold")]
    InvalidThresholds,
    #[error("adaptation refused: similarity {similarity} is below {threshold}")]
    AdaptationRefused { similarity: f64, threshold: f64 },
    #[error("invalid curation parameter: {0}")]
    InvalidConfig(&'static str),
    #[error("assignment violates {0}")]
    AssignmentViolation(&'static str),
}

/// Cosine similarity of two claim vectors.
pub fn claim_similarity(a: &[f64], b: &[f64]) -> Result<f64, CurationError> {
    if a.len() != b.len() {
        return Err(CurationError::DimensionMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(CurationError::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MatchDecision {
    NoMatch,
    Adapt,
    Reuse,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchThresholds {
    pub reuse: f64,
    pub adapt: f64,
}

impl Default for MatchThresholds {
    fn default() -> Self {
        Self {
            reuse: 0.95,
            adapt: 0.80,
        }
    }
}

impl MatchThresholds {
    pub fn validate(&self) -> Result<(), CurationError> {
        if self.adapt <= self.reuse && self.adapt.is_finite() && self.reuse.is_finite() {
            Ok(())
        } else {
            Err(CurationError::InvalidThresholds)
        }
    }

    pub fn decide(&self, similarity: f64) -> MatchDecision {
        if similarity >= self.reuse {
            MatchDecision::Reuse
        } else if similarity >= self.adapt {
            MatchDecision::Adapt
        } else {
            MatchDecision::NoMatch
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Best-matching corpus note, absent for an empty corpus.
    pub note_id: Option<NoteId>,
    pub target_post_id: PostId,
    pub similarity: Option<f64>,
    pub decision: MatchDecision,
}

/// Finds the corpus note whose claim is closest to the post's claim.
/// `helpful_notes` should only hold notes currently rated Helpful.
pub fn match_note(
    post: &Post,
    helpful_notes: &[NoteVector],
    thresholds: &MatchThresholds,
) -> Result<MatchResult, CurationError> {
    thresholds.validate()?;
    let mut best: Option<(NoteId, f64)> = None;
    for n in helpful_notes {
        let s = claim_similarity(&post.claim, &n.claim)?;
        let better = match best {
            None => true,
            Some((id, b)) => s > b || (s == b && n.note_id < id),
        };
        if better {
            best = Some((n.note_id, s));
        }
    }
    Ok(match best {
        None => MatchResult {
            note_id: None,
            target_post_id: post.post_id,
            similarity: None,
            decision: MatchDecision::NoMatch,
        },
        Some((id, s)) => MatchResult {
            note_id: Some(id),
            target_post_id: post.post_id,
            similarity: Some(s),
            decision: thresholds.decide(s),
        },
    })
}

/// Retargets a Helpful note at a new post. Content is copied verbatim; only
/// the claim and post change. The caller must treat the result as unrated.
pub fn adapt_note(
    note: &NoteVector,
    target: &Post,
    adapt_threshold: f64,
    similarity: f64,
    new_id: NoteId,
    round: u32,
) -> Result<NoteVector, CurationError> {
    if !(similarity >= adapt_threshold) {
        return Err(CurationError::AdaptationRefused {
            similarity,
            threshold: adapt_threshold,
        });
    }
    Ok(NoteVector {
        note_id: new_id,
        post_id: target.post_id,
        claim: target.claim.clone(),
        adapted_from: Some(note.note_id),
        round_created: round,
        ..note.clone()
    })
}

/// Greedy farthest-point order over `points`, seeded at index 0. Stops early
/// (returning fewer than `m`) once every remaining point coincides with a
/// selected one.
pub fn farthest_point_indices(points: &[Vec<f64>], m: usize) -> Vec<usize> {
    let n = points.len();
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let mut selected = vec![0usize];
    let mut in_set = vec![false; n];
    in_set[0] = true;
    let mut min_dist: Vec<f64> = points.iter().map(|p| euclidean(&points[0], p)).collect();
    while selected.len() < m.min(n) {
        let mut pick = None;
        let mut far = 0.0;
        for i in 0..n {
            if !in_set[i] && min_dist[i] > far {
                far = min_dist[i];
                pick = Some(i);
            }
        }
        let Some(i) = pick else { break };
        selected.push(i);
        in_set[i] = true;
        for j in 0..n {
            min_dist[j] = min_dist[j].min(euclidean(&points[i], &points[j]));
        }
    }
    selected
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSelection {
    pub note_ids: Vec<NoteId>,
    /// Output contains exact duplicates (padding after distinct points ran out).
    pub dedup: bool,
}

/// Picks up to `m` mutually distant notes for one post by farthest-point
/// selection over style and slant, starting from the lowest note id.
pub fn cluster_notes(notes: &[NoteVector], m: usize) -> Result<ClusterSelection, CurationError> {
    if m == 0 {
        return Err(CurationError::InvalidConfig("m"));
    }
    let mut sorted: Vec<&NoteVector> = notes.iter().collect();
    sorted.sort_by_key(|n| n.note_id);
    let points: Vec<Vec<f64>> = sorted.iter().map(|n| n.style_slant()).collect();
    let target = m.min(points.len());
    let mut chosen = farthest_point_indices(&points, target);
    let mut dedup = false;
    if chosen.len() < target {
        dedup = true;
        let taken: BTreeSet<usize> = chosen.iter().copied().collect();
        let pad: Vec<usize> = (0..points.len())
            .filter(|i| !taken.contains(i))
            .take(target - chosen.len())
            .collect();
        chosen.extend(pad);
    } else {
        'outer: for (a, &i) in chosen.iter().enumerate() {
            for &j in &chosen[a + 1..] {
                if points[i] == points[j] {
                    dedup = true;
                    break 'outer;
                }
            }
        }
    }
    Ok(ClusterSelection {
        note_ids: chosen.into_iter().map(|i| sorted[i].note_id).collect(),
        dedup,
    })
}

/// A note waiting for ratings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingNote {
    pub note_id: NoteId,
    pub priority: f64,
    /// Raters wanted this round.
    pub demand: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub by_rater: BTreeMap<RaterId, Vec<NoteId>>,
    pub per_note: BTreeMap<NoteId, u32>,
}

impl Assignment {
    pub fn total(&self) -> usize {
        self.by_rater.values().map(Vec::len).sum()
    }

    pub fn assigned(&self, note: NoteId) -> u32 {
        self.per_note.get(&note).copied().unwrap_or(0)
    }

    /// Number of pending notes that received fewer raters than they wanted.
    pub fn shortfall(&self, pending: &[PendingNote]) -> usize {
        pending.iter().filter(|p| self.assigned(p.note_id) < p.demand).count()
    }

    /// Checks capacity, duplication and already-rated constraints.
    pub fn validate(
        &self,
        raters: &[(RaterId, u32)],
        already_rated: &BTreeSet<(RaterId, NoteId)>,
    ) -> Result<(), CurationError> {
        let caps: BTreeMap<RaterId, u32> = raters.iter().copied().collect();
        for (rater, notes) in &self.by_rater {
            let Some(cap) = caps.get(rater) else {
                return Err(CurationError::AssignmentViolation("unknown rater"));
            };
            if notes.len() > *cap as usize {
                return Err(CurationError::AssignmentViolation("capacity"));
            }
            let distinct: BTreeSet<&NoteId> = notes.iter().collect();
            if distinct.len() != notes.len() {
                return Err(CurationError::AssignmentViolation("duplicate note"));
            }
            if notes.iter().any(|n| already_rated.contains(&(*rater, *n))) {
                return Err(CurationError::AssignmentViolation("already rated"));
            }
        }
        Ok(())
    }
}

/// Greedy allocation: notes in descending priority (ties by ascending id)
/// each take up to `demand` eligible raters, scanning raters round-robin
/// from where the previous note left off.
pub fn allocate_raters(
    pending: &[PendingNote],
    raters: &[(RaterId, u32)],
    already_rated: &BTreeSet<(RaterId, NoteId)>,
) -> Assignment {
    let mut order: Vec<&PendingNote> = pending.iter().collect();
    order.sort_by(|a, b| {
        b.priority
            .partial_cmp(&a.priority)
            .unwrap_or(Ordering::Equal)
            .then(a.note_id.cmp(&b.note_id))
    });
    let mut remaining: Vec<u32> = raters.iter().map(|r| r.1).collect();
    let mut out = Assignment::default();
    let n = raters.len();
    let mut cursor = 0usize;
    for p in order {
        let mut got = 0u32;
        let start = cursor;
        for step in 0..n {
            if got >= p.demand {
                break;
            }
            let r = (start + step) % n;
            let rater = raters[r].0;
            if remaining[r] == 0 || already_rated.contains(&(rater, p.note_id)) {
                continue;
            }
            remaining[r] -= 1;
            got += 1;
            out.by_rater.entry(rater).or_default().push(p.note_id);
            cursor = (r + 1) % n;
        }
        if got > 0 {
            out.per_note.insert(p.note_id, got);
        }
    }
    out
}
