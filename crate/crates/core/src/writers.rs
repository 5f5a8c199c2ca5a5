//! Note writers: post selection, note generation from writer policies, and
//! validation of notes submitted through the external protocol.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{NoteId, NoteOrigin, PostId, WriterId};
use crate::math::{clamp_signed, clamp_unit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: PostId,
    pub claim: Vec<f64>,
    pub reach: f64,
    pub mislead_likelihood: f64,
    pub flagged: bool,
    pub round_created: u32,
}

/// Abstract content of a note. `accuracy` is hidden ground truth that raters
/// only perceive through their own (possibly polish-biased) judgement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoteVector {
    pub note_id: NoteId,
    pub post_id: PostId,
    pub accuracy: f64,
    pub polish: f64,
    pub slant: Vec<f64>,
    pub style: Vec<f64>,
    pub claim: Vec<f64>,
    pub origin: NoteOrigin,
    pub adapted_from: Option<NoteId>,
    pub writer_id: WriterId,
    pub round_created: u32,
}

impl NoteVector {
    /// Range checks on the content fields; returns the offending field name.
    pub fn check_ranges(&self) -> Result<(), &'static str> {
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err("accuracy");
        }
        if !(0.0..=1.0).contains(&self.polish) {
            return Err("polish");
        }
        if !self.slant.iter().all(|s| (-1.0..=1.0).contains(s)) {
            return Err("slant");
        }
        if !self.style.iter().all(|s| s.is_finite()) {
            return Err("style");
        }
        if !self.claim.iter().all(|s| s.is_finite()) {
            return Err("claim");
        }
        Ok(())
    }

    /// Style and slant concatenated; the space prescreening clusters in.
    pub fn style_slant(&self) -> Vec<f64> {
        let mut v = self.style.clone();
        v.extend_from_slice(&self.slant);
        v
    }
}

/// Tunable content parameters of a writer policy. These are what the RLCF
/// update moves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    pub accuracy_mean: f64,
    pub polish_mean: f64,
    pub slant_bias: Vec<f64>,
    pub style_mean: Vec<f64>,
    pub style_sd: f64,
    pub accuracy_sd: f64,
    pub polish_sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WriterPolicy {
    pub writer_id: WriterId,
    pub kind: NoteOrigin,
    pub params: PolicyParams,
    pub latency_rounds: u32,
    pub notes_per_round: u32,
    /// Upper bound on `accuracy_mean + polish_mean`. A writer at its
    /// capability limit can only buy polish with accuracy and vice versa.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capability: Option<f64>,
}

/// Euclidean projection of `(accuracy, polish)` in the unit square onto
/// `accuracy + polish <= cap`.
fn project_capability(a: f64, q: f64, cap: Option<f64>) -> (f64, f64) {
    let Some(cap) = cap else {
        return (a, q);
    };
    let excess = a + q - cap;
    if excess <= 0.0 {
        return (a, q);
    }
    let (a, q) = (a - excess / 2.0, q - excess / 2.0);
    if a < 0.0 {
        (0.0, cap.min(1.0))
    } else if q < 0.0 {
        (cap.min(1.0), 0.0)
    } else {
        (a, q)
    }
}

impl WriterPolicy {
    fn archetype(
        writer_id: WriterId,
        kind: NoteOrigin,
        accuracy_mean: f64,
        polish_mean: f64,
        latency_rounds: u32,
        notes_per_round: u32,
        viewpoint_dim: usize,
        style_dim: usize,
    ) -> Self {
        Self {
            writer_id,
            kind,
            params: PolicyParams {
                accuracy_mean,
                polish_mean,
                slant_bias: vec![0.0; viewpoint_dim],
                style_mean: vec![0.0; style_dim],
                style_sd: 0.1,
                accuracy_sd: 0.15,
                polish_sd: 0.1,
            },
            latency_rounds,
            notes_per_round,
            capability: None,
        }
    }

    pub fn human(writer_id: WriterId, viewpoint_dim: usize, style_dim: usize) -> Self {
        Self::archetype(writer_id, NoteOrigin::Human, 0.85, 0.5, 2, 2, viewpoint_dim, style_dim)
    }

    pub fn human_ai_assisted(writer_id: WriterId, viewpoint_dim: usize, style_dim: usize) -> Self {
        Self::archetype(
            writer_id,
            NoteOrigin::HumanAIAssisted,
            0.85,
            0.7,
            1,
            2,
            viewpoint_dim,
            style_dim,
        )
    }

    pub fn fully_ai(writer_id: WriterId, viewpoint_dim: usize, style_dim: usize) -> Self {
        let mut p = Self::archetype(writer_id, NoteOrigin::FullyAI, 0.75, 0.9, 0, 10, viewpoint_dim, style_dim);
        p.capability = Some(1.65);
        p.params.style_sd = 0.02;
        p
    }

    pub fn validate(&self, viewpoint_dim: usize, style_dim: usize) -> Result<(), WriterError> {
        let p = &self.params;
        let bad = |field: &'static str| Err(WriterError::InvalidConfig(field));
        if !(0.0..=1.0).contains(&p.accuracy_mean) {
            return bad("accuracy_mean");
        }
        if !(0.0..=1.0).contains(&p.polish_mean) {
            return bad("polish_mean");
        }
        if p.slant_bias.len() != viewpoint_dim || !p.slant_bias.iter().all(|s| (-1.0..=1.0).contains(s)) {
            return bad("slant_bias");
        }
        if p.style_mean.len() != style_dim || !p.style_mean.iter().all(|s| s.is_finite()) {
            return bad("style_mean");
        }
        for (name, sd) in [
            ("style_sd", p.style_sd),
            ("accuracy_sd", p.accuracy_sd),
            ("polish_sd", p.polish_sd),
        ] {
            if !(sd >= 0.0) || !sd.is_finite() {
                return bad(name);
            }
        }
        if self.kind == NoteOrigin::FullyAI && self.latency_rounds != 0 {
            return bad("latency_rounds");
        }
        if let Some(c) = self.capability {
            if !(0.0..=2.0).contains(&c) || p.accuracy_mean + p.polish_mean > c + 1e-12 {
                return bad("capability");
            }
        }
        Ok(())
    }

    /// Packs the tunable means into a flat vector:
    /// `[accuracy_mean, polish_mean, slant_bias.., style_mean..]`.
    pub fn theta(&self) -> Vec<f64> {
        let p = &self.params;
        let mut t = vec![p.accuracy_mean, p.polish_mean];
        t.extend_from_slice(&p.slant_bias);
        t.extend_from_slice(&p.style_mean);
        t
    }

    /// Inverse of [`theta`](Self::theta); ranges are clamped.
    pub fn with_theta(&self, theta: &[f64]) -> Self {
        let mut out = self.clone();
        let dv = self.params.slant_bias.len();
        let p = &mut out.params;
        let (a, q) = project_capability(clamp_unit(theta[0]), clamp_unit(theta[1]), self.capability);
        p.accuracy_mean = a;
        p.polish_mean = q;
        for (s, t) in p.slant_bias.iter_mut().zip(&theta[2..2 + dv]) {
            *s = clamp_signed(*t);
        }
        p.style_mean.copy_from_slice(&theta[2 + dv..]);
        out
    }

    /// The note this policy writes with all noise switched off.
    pub fn mean_note(&self, post: &Post, note_id: NoteId, round: u32) -> NoteVector {
        let p = &self.params;
        NoteVector {
            note_id,
            post_id: post.post_id,
            accuracy: clamp_unit(p.accuracy_mean),
            polish: clamp_unit(p.polish_mean),
            slant: p.slant_bias.iter().map(|s| clamp_signed(*s)).collect(),
            style: p.style_mean.clone(),
            claim: post.claim.clone(),
            origin: self.kind,
            adapted_from: None,
            writer_id: self.writer_id,
            round_created: round,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionWeights {
    pub reach: f64,
    pub mislead: f64,
    pub flag: f64,
}

impl Default for SelectionWeights {
    fn default() -> Self {
        Self {
            reach: 0.5,
            mislead: 0.3,
            flag: 0.2,
        }
    }
}

impl SelectionWeights {
    pub fn validate(&self) -> Result<(), WriterError> {
        let ws = [self.reach, self.mislead, self.flag];
        if ws.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || ws.iter().all(|w| *w == 0.0) {
            return Err(WriterError::InvalidConfig("selection weights"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum WriterError {
    #[error("invalid writer config: {0}")]
    InvalidConfig(&'static str),
}

/// Priority of each post: reach normalized by the batch maximum, plus
/// mislead likelihood, plus the community flag.
pub fn post_priorities(posts: &[Post], weights: &SelectionWeights) -> Vec<f64> {
    let max_reach = posts.iter().map(|p| p.reach).fold(0.0, f64::max);
    posts
        .iter()
        .map(|p| {
            let reach = if max_reach > 0.0 { p.reach / max_reach } else { 0.0 };
            weights.reach * reach
                + weights.mislead * p.mislead_likelihood
                + weights.flag * if p.flagged { 1.0 } else { 0.0 }
        })
        .collect()
}

/// Top-`k` posts by priority, ties broken by ascending post id.
pub fn select_posts(posts: &[Post], weights: &SelectionWeights, k: usize) -> Result<Vec<PostId>, WriterError> {
    weights.validate()?;
    let priorities = post_priorities(posts, weights);
    let mut order: Vec<usize> = (0..posts.len()).collect();
    order.sort_by(|&a, &b| {
        priorities[b]
            .partial_cmp(&priorities[a])
            .unwrap_or(Ordering::Equal)
            .then(posts[a].post_id.cmp(&posts[b].post_id))
    });
    Ok(order.into_iter().take(k).map(|i| posts[i].post_id).collect())
}

/// Samples one note from `policy` for `post`. `rng` should be the
/// `(round, writer, post)` substream.
pub fn generate_note<R: Rng + ?Sized>(
    policy: &WriterPolicy,
    post: &Post,
    note_id: NoteId,
    round: u32,
    rng: &mut R,
) -> NoteVector {
    let p = &policy.params;
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let accuracy = clamp_unit(p.accuracy_mean + p.accuracy_sd * normal());
    let polish = clamp_unit(p.polish_mean + p.polish_sd * normal());
    let style_noise: Vec<f64> = p.style_mean.iter().map(|_| normal()).collect();
    let style = p
        .style_mean
        .iter()
        .zip(&style_noise)
        .map(|(m, z)| m + p.style_sd * z)
        .collect();
    // Slant shares the leading style noise coordinates.
    let slant = p
        .slant_bias
        .iter()
        .enumerate()
        .map(|(i, b)| clamp_signed(b + p.style_sd * style_noise.get(i).copied().unwrap_or(0.0)))
        .collect();
    NoteVector {
        note_id,
        post_id: post.post_id,
        accuracy,
        polish,
        slant,
        style,
        claim: post.claim.clone(),
        origin: policy.kind,
        adapted_from: None,
        writer_id: policy.writer_id,
        round_created: round,
    }
}

/// One decoded record of the external note-writing protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalSubmission {
    pub submission_id: String,
    pub post_id: PostId,
    pub accuracy: f64,
    pub polish: f64,
    pub slant: Vec<f64>,
    pub style: Vec<f64>,
    pub claim: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum IngestError {
    #[error("malformed record at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unknown post {0}")]
    UnknownPost(PostId),
    #[error("duplicate submission id {0:?}")]
    DuplicateSubmission(String),
    #[error("field out of range: {0}")]
    Validation(&'static str),
}

/// Submission ids already accepted. The only mutable state in ingestion.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SubmissionRegistry {
    seen: BTreeSet<String>,
}

impl SubmissionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.seen.contains(id)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// Dimensions an external note must match.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoteShape {
    pub viewpoint_dim: usize,
    pub style_dim: usize,
    pub claim_dim: usize,
}

/// Validates an external submission against the known posts and registers
/// its id. The returned note is `FullyAI` and enters the shared pool.
pub fn ingest_submission(
    submission: &ExternalSubmission,
    posts: &BTreeMap<PostId, Post>,
    registry: &mut SubmissionRegistry,
    shape: NoteShape,
    note_id: NoteId,
    round: u32,
) -> Result<NoteVector, IngestError> {
    let s = submission;
    if s.submission_id.is_empty() {
        return Err(IngestError::Validation("submission_id"));
    }
    if !(0.0..=1.0).contains(&s.accuracy) {
        return Err(IngestError::Validation("accuracy"));
    }
    if !(0.0..=1.0).contains(&s.polish) {
        return Err(IngestError::Validation("polish"));
    }
    if s.slant.len() != shape.viewpoint_dim || !s.slant.iter().all(|x| (-1.0..=1.0).contains(x)) {
        return Err(IngestError::Validation("slant"));
    }
    if s.style.len() != shape.style_dim || !s.style.iter().all(|x| x.is_finite()) {
        return Err(IngestError::Validation("style"));
    }
    if s.claim.len() != shape.claim_dim
        || !s.claim.iter().all(|x| x.is_finite())
        || s.claim.iter().all(|x| *x == 0.0)
    {
        return Err(IngestError::Validation("claim"));
    }
    if !posts.contains_key(&s.post_id) {
        return Err(IngestError::UnknownPost(s.post_id));
    }
    if !registry.seen.insert(s.submission_id.clone()) {
        return Err(IngestError::DuplicateSubmission(s.submission_id.clone()));
    }
    Ok(NoteVector {
        note_id,
        post_id: s.post_id,
        accuracy: s.accuracy,
        polish: s.polish,
        slant: s.slant.clone(),
        style: s.style.clone(),
        claim: s.claim.clone(),
        origin: NoteOrigin::FullyAI,
        adapted_from: None,
        writer_id: WriterId::EXTERNAL,
        round_created: round,
    })
}
