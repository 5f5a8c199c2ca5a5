//! Bridging matrix-factorization scorer.
//!
//! Each rating is modelled as `mu + i_u + i_n + f_u . f_n`. The factor term
//! soaks up viewpoint-aligned agreement, so a note only earns a large
//! intercept `i_n` when raters on both sides of the factor axis rate it
//! helpful. That intercept is the note's helpfulness score.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{NoteId, NoteOrigin, RaterId};
use crate::linalg::NormalEquations;
use crate::math::{all_finite, dot};
use crate::rng::{substream, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RatingLevel {
    #[serde(rename = "helpful")]
    Helpful,
    #[serde(rename = "somewhat_helpful")]
    SomewhatHelpful,
    #[serde(rename = "not_helpful")]
    NotHelpful,
}

impl RatingLevel {
    pub fn numeric_value(self) -> f64 {
        match self {
            RatingLevel::Helpful => 1.0,
            RatingLevel::SomewhatHelpful => 0.5,
            RatingLevel::NotHelpful => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RatingLevel::Helpful => "helpful",
            RatingLevel::SomewhatHelpful => "somewhat_helpful",
            RatingLevel::NotHelpful => "not_helpful",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "helpful" => Some(RatingLevel::Helpful),
            "somewhat_helpful" => Some(RatingLevel::SomewhatHelpful),
            "not_helpful" => Some(RatingLevel::NotHelpful),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RatingTag {
    IncorrectInformation,
    ArgumentativeOrBiasedLanguage,
    SourcesMissingOrUnreliable,
    ResonatesWithExperience,
    Other,
}

impl RatingTag {
    pub const ALL: [RatingTag; 5] = [
        RatingTag::IncorrectInformation,
        RatingTag::ArgumentativeOrBiasedLanguage,
        RatingTag::SourcesMissingOrUnreliable,
        RatingTag::ResonatesWithExperience,
        RatingTag::Other,
    ];

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RatingTag::IncorrectInformation => "incorrect_information",
            RatingTag::ArgumentativeOrBiasedLanguage => "argumentative_or_biased_language",
            RatingTag::SourcesMissingOrUnreliable => "sources_missing_or_unreliable",
            RatingTag::ResonatesWithExperience => "resonates_with_experience",
            RatingTag::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        RatingTag::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

/// A set of distinct rating tags.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagSet(u8);

impl TagSet {
    pub fn new() -> Self {
        Self(0)
    }

    pub fn insert(&mut self, tag: RatingTag) {
        self.0 |= tag.bit();
    }

    pub fn contains(&self, tag: RatingTag) -> bool {
        self.0 & tag.bit() != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = RatingTag> + '_ {
        RatingTag::ALL.into_iter().filter(|t| self.contains(*t))
    }
}

impl FromIterator<RatingTag> for TagSet {
    fn from_iter<I: IntoIterator<Item = RatingTag>>(iter: I) -> Self {
        let mut set = TagSet::new();
        for t in iter {
            set.insert(t);
        }
        set
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CritiqueDimension {
    Accuracy,
    Slant,
    Polish,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CritiqueDirection {
    TooLow,
    TooHigh,
}

/// Structured stand-in for a free-text critique.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CritiqueToken {
    pub dimension: CritiqueDimension,
    pub direction: CritiqueDirection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub rater_id: RaterId,
    pub note_id: NoteId,
    pub level: RatingLevel,
    pub tags: TagSet,
    pub critique: Option<CritiqueToken>,
    pub round: u32,
}

impl Rating {
    pub fn new(rater_id: RaterId, note_id: NoteId, level: RatingLevel, round: u32) -> Self {
        Self {
            rater_id,
            note_id,
            level,
            tags: TagSet::new(),
            critique: None,
            round,
        }
    }

    pub fn value(&self) -> f64 {
        self.level.numeric_value()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaterEmbedding {
    pub intercept: f64,
    pub factor: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoteEmbedding {
    pub intercept: f64,
    pub factor: Vec<f64>,
    /// Only recorded by origin-aware fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<NoteOrigin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgingModel {
    pub global_intercept: f64,
    pub factor_dim: usize,
    pub raters: BTreeMap<RaterId, RaterEmbedding>,
    pub notes: BTreeMap<NoteId, NoteEmbedding>,
    /// Learned per-origin offsets, indexed by [`NoteOrigin::index`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_offsets: Option<[f64; 3]>,
}

impl BridgingModel {
    pub fn note_intercept(&self, note: NoteId) -> Option<f64> {
        self.notes.get(&note).map(|e| e.intercept)
    }

    pub fn is_finite(&self) -> bool {
        self.global_intercept.is_finite()
            && self
                .raters
                .values()
                .all(|e| e.intercept.is_finite() && e.factor.iter().all(|x| x.is_finite()))
            && self
                .notes
                .values()
                .all(|e| e.intercept.is_finite() && e.factor.iter().all(|x| x.is_finite()))
            && self
                .origin_offsets
                .is_none_or(|o| o.iter().all(|x| x.is_finite()))
    }

    /// The regularized squared-error objective minimized by [`fit_bridging`],
    /// evaluated on `ratings` (which should be the capped training set).
    pub fn objective(&self, ratings: &[&Rating], config: &FitConfig) -> Result<f64, BridgeError> {
        let mut loss = 0.0;
        for r in ratings {
            let e = r.value() - predict_rating(self, r.rater_id, r.note_id)?;
            loss += e * e;
        }
        let mut intercepts: f64 = self.raters.values().map(|e| e.intercept * e.intercept).sum();
        intercepts += self.notes.values().map(|e| e.intercept * e.intercept).sum::<f64>();
        if let Some(offsets) = self.origin_offsets {
            intercepts += offsets.iter().map(|o| o * o).sum::<f64>();
        }
        let factors: f64 = self.raters.values().map(|e| dot(&e.factor, &e.factor)).sum::<f64>()
            + self.notes.values().map(|e| dot(&e.factor, &e.factor)).sum::<f64>();
        Ok(loss + config.l2_intercept * intercepts + config.l2_factor * factors)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntityKind {
    Rater,
    Note,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::Rater => "rater",
            EntityKind::Note => "note",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum BridgeError {
    #[error("unknown {kind} id {id}")]
    UnknownEntity { kind: EntityKind, id: u64 },
    #[error("no ratings to fit")]
    EmptyInput,
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Divergence { epoch: u32 },
    #[error("invalid thresholds: t_low must be below t_high")]
    InvalidThresholds,
    #[error("rater {rater} rated note {note} more than once")]
    DuplicateRating { rater: RaterId, note: NoteId },
    #[error("invalid fit config: {0}")]
    InvalidConfig(&'static str),
    #[error("origin-aware fit has no origin for note {0}")]
    MissingOrigin(NoteId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub factor_dim: usize,
    pub l2_intercept: f64,
    pub l2_factor: f64,
    pub learning_rate: f64,
    pub epochs: u32,
    /// Exact block least-squares sweeps run after the SGD epochs.
    pub refine_sweeps: u32,
    pub seed: u64,
    pub max_ratings_per_rater: Option<u32>,
    pub origin_aware: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            factor_dim: 1,
            l2_intercept: 0.15,
            l2_factor: 0.03,
            learning_rate: 0.05,
            epochs: 200,
            refine_sweeps: 200,
            seed: 0,
            max_ratings_per_rater: None,
            origin_aware: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), BridgeError> {
        if self.factor_dim == 0 {
            return Err(BridgeError::InvalidConfig("factor_dim"));
        }
        if !(self.l2_intercept >= 0.0) || !self.l2_intercept.is_finite() {
            return Err(BridgeError::InvalidConfig("l2_intercept"));
        }
        if !(self.l2_factor >= 0.0) || !self.l2_factor.is_finite() {
            return Err(BridgeError::InvalidConfig("l2_factor"));
        }
        if self.l2_intercept < self.l2_factor {
            return Err(BridgeError::InvalidConfig("l2_intercept"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(BridgeError::InvalidConfig("learning_rate"));
        }
        if self.epochs == 0 {
            return Err(BridgeError::InvalidConfig("epochs"));
        }
        if self.max_ratings_per_rater == Some(0) {
            return Err(BridgeError::InvalidConfig("max_ratings_per_rater"));
        }
        Ok(())
    }
}

/// Adds `l_intercept` to the first diagonal entry and `l_factor` to the rest.
fn add_ridge(ne: &mut NormalEquations, unit: &mut [f64], l_intercept: f64, l_factor: f64) {
    for j in 0..unit.len() {
        unit.iter_mut().for_each(|x| *x = 0.0);
        unit[j] = 1.0;
        ne.add(unit, 0.0, if j == 0 { l_intercept } else { l_factor });
    }
}

/// Subtracts the mean from `xs` and returns it.
fn center(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    for x in xs.iter_mut() {
        *x -= m;
    }
    m
}

/// Returns `mu + i_u + i_n + f_u . f_n` (plus the note's origin offset for
/// origin-aware models). No clamping.
pub fn predict_rating(model: &BridgingModel, rater: RaterId, note: NoteId) -> Result<f64, BridgeError> {
    let u = model.raters.get(&rater).ok_or(BridgeError::UnknownEntity {
        kind: EntityKind::Rater,
        id: rater.0,
    })?;
    let n = model.notes.get(&note).ok_or(BridgeError::UnknownEntity {
        kind: EntityKind::Note,
        id: note.0,
    })?;
    let mut r = model.global_intercept + u.intercept + n.intercept + dot(&u.factor, &n.factor);
    if let (Some(offsets), Some(origin)) = (model.origin_offsets, n.origin) {
        r += offsets[origin.index()];
    }
    Ok(r)
}

/// Applies the per-rater influence cap: raters with more than `cap` ratings
/// keep a seeded random subset of exactly `cap`. Input order is preserved.
pub fn influence_capped(ratings: &[Rating], cap: Option<u32>, seed: u64) -> Vec<&Rating> {
    let Some(cap) = cap else {
        return ratings.iter().collect();
    };
    let mut by_rater: BTreeMap<RaterId, Vec<usize>> = BTreeMap::new();
    for (i, r) in ratings.iter().enumerate() {
        by_rater.entry(r.rater_id).or_default().push(i);
    }
    let mut keep = vec![true; ratings.len()];
    for (rater, mut idx) in by_rater {
        if idx.len() <= cap as usize {
            continue;
        }
        let mut rng = substream(seed, &[tag::INFLUENCE_CAP, rater.0]);
        idx.shuffle(&mut rng);
        for &i in &idx[cap as usize..] {
            keep[i] = false;
        }
    }
    ratings
        .iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect()
}

pub fn fit_bridging(ratings: &[Rating], config: &FitConfig) -> Result<BridgingModel, BridgeError> {
    fit_inner(ratings, None, config)
}

/// Like [`fit_bridging`], supplying the note origins an origin-aware fit needs.
pub fn fit_bridging_with_origins(
    ratings: &[Rating],
    origins: &BTreeMap<NoteId, NoteOrigin>,
    config: &FitConfig,
) -> Result<BridgingModel, BridgeError> {
    fit_inner(ratings, Some(origins), config)
}

struct Term {
    rater: usize,
    note: usize,
    origin: usize,
    value: f64,
}

fn fit_inner(
    ratings: &[Rating],
    origins: Option<&BTreeMap<NoteId, NoteOrigin>>,
    config: &FitConfig,
) -> Result<BridgingModel, BridgeError> {
    config.validate()?;
    if ratings.is_empty() {
        return Err(BridgeError::EmptyInput);
    }
    let origins = match (config.origin_aware, origins) {
        (true, None) => return Err(BridgeError::InvalidConfig("origin_aware requires note origins")),
        (true, Some(o)) => Some(o),
        (false, _) => None,
    };
    let mut seen = BTreeSet::new();
    for r in ratings {
        if !seen.insert((r.rater_id, r.note_id)) {
            return Err(BridgeError::DuplicateRating {
                rater: r.rater_id,
                note: r.note_id,
            });
        }
    }

    let training = influence_capped(ratings, config.max_ratings_per_rater, config.seed);

    let rater_ids: Vec<RaterId> = training
        .iter()
        .map(|r| r.rater_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let note_ids: Vec<NoteId> = training
        .iter()
        .map(|r| r.note_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let rater_index: BTreeMap<RaterId, usize> =
        rater_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let note_index: BTreeMap<NoteId, usize> =
        note_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();

    let mut note_origin = vec![NoteOrigin::Human; note_ids.len()];
    if let Some(origins) = origins {
        for (i, id) in note_ids.iter().enumerate() {
            note_origin[i] = *origins.get(id).ok_or(BridgeError::MissingOrigin(*id))?;
        }
    }

    let terms: Vec<Term> = training
        .iter()
        .map(|r| {
            let note = note_index[&r.note_id];
            Term {
                rater: rater_index[&r.rater_id],
                note,
                origin: note_origin[note].index(),
                value: r.value(),
            }
        })
        .collect();

    let d = config.factor_dim;
    let nu = rater_ids.len();
    let nn = note_ids.len();
    let mut rater_count = vec![0.0f64; nu];
    let mut note_count = vec![0.0f64; nn];
    let mut origin_count = [0.0f64; 3];
    for t in &terms {
        rater_count[t.rater] += 1.0;
        note_count[t.note] += 1.0;
        origin_count[t.origin] += 1.0;
    }

    let mut init = substream(config.seed, &[tag::FIT_INIT]);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| init.random_range(-0.1..=0.1)).collect() };
    let mut mu = terms.iter().map(|t| t.value).sum::<f64>() / terms.len() as f64;
    let mut iu = draw(nu);
    let mut fu = draw(nu * d);
    let mut i_n = draw(nn);
    let mut fnote = draw(nn * d);
    let mut offsets = [0.0f64; 3];
    let use_offsets = origins.is_some();

    let lr = config.learning_rate;
    let li = config.l2_intercept;
    let lf = config.l2_factor;
    let mut order: Vec<usize> = (0..terms.len()).collect();
    let mut shuffle_rng = substream(config.seed, &[tag::FIT_SHUFFLE]);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for &k in &order {
            let t = &terms[k];
            let (u, n) = (t.rater, t.note);
            let fu_row = &mut fu[u * d..(u + 1) * d];
            let fn_row = &mut fnote[n * d..(n + 1) * d];
            let mut pred = mu + iu[u] + i_n[n] + dot(fu_row, fn_row);
            if use_offsets {
                pred += offsets[t.origin];
            }
            let e = t.value - pred;
            // Regularization is split evenly over an entity's terms so one
            // epoch applies the full-batch penalty gradient once.
            let cu = rater_count[u];
            let cn = note_count[n];
            mu += lr * e;
            iu[u] += lr * (e - li * iu[u] / cu);
            i_n[n] += lr * (e - li * i_n[n] / cn);
            for j in 0..d {
                let a = fu_row[j];
                let b = fn_row[j];
                fu_row[j] += lr * (e * b - lf * a / cu);
                fn_row[j] += lr * (e * a - lf * b / cn);
            }
            if use_offsets {
                let o = &mut offsets[t.origin];
                *o += lr * (e - li * *o / origin_count[t.origin]);
            }
        }

        // Shifting every note (or rater, or origin) intercept by the same
        // amount and moving it into mu leaves all predictions unchanged, so
        // only the penalty pins that direction down and SGD drifts along it.
        // The optimum has each group centered; centering is an exact descent
        // step along it.
        mu += center(&mut i_n);
        mu += center(&mut iu);
        if use_offsets {
            let present: Vec<usize> = (0..3).filter(|o| origin_count[*o] > 0.0).collect();
            let m = present.iter().map(|o| offsets[*o]).sum::<f64>() / present.len() as f64;
            for o in present {
                offsets[o] -= m;
            }
            mu += m;
        }

        let mut loss = 0.0;
        for t in &terms {
            let mut pred = mu
                + iu[t.rater]
                + i_n[t.note]
                + dot(&fu[t.rater * d..(t.rater + 1) * d], &fnote[t.note * d..(t.note + 1) * d]);
            if use_offsets {
                pred += offsets[t.origin];
            }
            let e = t.value - pred;
            loss += e * e;
        }
        loss += li * (iu.iter().map(|x| x * x).sum::<f64>() + i_n.iter().map(|x| x * x).sum::<f64>());
        loss += lf * (fu.iter().map(|x| x * x).sum::<f64>() + fnote.iter().map(|x| x * x).sum::<f64>());
        if !loss.is_finite() || !mu.is_finite() {
            return Err(BridgeError::Divergence { epoch });
        }
    }

    // Block-coordinate refinement of the same objective. Each block (mu, one
    // rater, one note, the origin offsets) is a ridge regression with the
    // others frozen and is solved exactly, so the loss never increases. SGD
    // alone crawls along the shallow valleys where an intercept trades off
    // against a factor.
    let k = 1 + d;
    let mut row = vec![0.0; k];
    let mut unit = vec![0.0; k];
    for _ in 0..config.refine_sweeps {
        let offset = |t: &Term, offsets: &[f64; 3]| if use_offsets { offsets[t.origin] } else { 0.0 };

        let mut sum = 0.0;
        for t in &terms {
            let f = dot(&fu[t.rater * d..(t.rater + 1) * d], &fnote[t.note * d..(t.note + 1) * d]);
            sum += t.value - iu[t.rater] - i_n[t.note] - f - offset(t, &offsets);
        }
        mu = sum / terms.len() as f64;

        let mut blocks: Vec<NormalEquations> = vec![NormalEquations::new(k); nu];
        for t in &terms {
            row[0] = 1.0;
            row[1..].copy_from_slice(&fnote[t.note * d..(t.note + 1) * d]);
            blocks[t.rater].add(&row, t.value - mu - i_n[t.note] - offset(t, &offsets), 1.0);
        }
        for (u, ne) in blocks.iter_mut().enumerate() {
            add_ridge(ne, &mut unit, li, lf);
            let x = ne.solve().x;
            iu[u] = x[0];
            fu[u * d..(u + 1) * d].copy_from_slice(&x[1..]);
        }

        let mut blocks: Vec<NormalEquations> = vec![NormalEquations::new(k); nn];
        for t in &terms {
            row[0] = 1.0;
            row[1..].copy_from_slice(&fu[t.rater * d..(t.rater + 1) * d]);
            blocks[t.note].add(&row, t.value - mu - iu[t.rater] - offset(t, &offsets), 1.0);
        }
        for (n, ne) in blocks.iter_mut().enumerate() {
            add_ridge(ne, &mut unit, li, lf);
            let x = ne.solve().x;
            i_n[n] = x[0];
            fnote[n * d..(n + 1) * d].copy_from_slice(&x[1..]);
        }

        if use_offsets {
            let mut sums = [0.0f64; 3];
            for t in &terms {
                let f = dot(&fu[t.rater * d..(t.rater + 1) * d], &fnote[t.note * d..(t.note + 1) * d]);
                sums[t.origin] += t.value - mu - iu[t.rater] - i_n[t.note] - f;
            }
            for o in 0..3 {
                if origin_count[o] > 0.0 {
                    offsets[o] = sums[o] / (origin_count[o] + li);
                }
            }
        }
        mu += center(&mut i_n);
        mu += center(&mut iu);
    }
    if !(mu.is_finite() && all_finite(&iu) && all_finite(&i_n) && all_finite(&fu) && all_finite(&fnote)) {
        return Err(BridgeError::Divergence { epoch: config.epochs });
    }

    let raters = rater_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            (
                *id,
                RaterEmbedding {
                    intercept: iu[i],
                    factor: fu[i * d..(i + 1) * d].to_vec(),
                },
            )
        })
        .collect();
    let notes = note_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            (
                *id,
                NoteEmbedding {
                    intercept: i_n[i],
                    factor: fnote[i * d..(i + 1) * d].to_vec(),
                    origin: use_offsets.then_some(note_origin[i]),
                },
            )
        })
        .collect();
    Ok(BridgingModel {
        global_intercept: mu,
        factor_dim: d,
        raters,
        notes,
        origin_offsets: use_offsets.then_some(offsets),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NoteStatus {
    #[serde(rename = "helpful")]
    Helpful,
    #[serde(rename = "not_helpful")]
    NotHelpful,
    #[serde(rename = "needs_more_ratings")]
    NeedsMoreRatings,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatusThresholds {
    /// `t_high`
    pub helpful: f64,
    /// `t_low`
    pub not_helpful: f64,
    pub min_ratings: u32,
}

impl Default for StatusThresholds {
    fn default() -> Self {
        Self {
            helpful: 0.40,
            not_helpful: -0.08,
            min_ratings: 5,
        }
    }
}

impl StatusThresholds {
    pub fn validate(&self) -> Result<(), BridgeError> {
        if self.not_helpful < self.helpful {
            Ok(())
        } else {
            Err(BridgeError::InvalidThresholds)
        }
    }

    /// Status for a note with intercept `i_n` and `rating_count` ratings.
    pub fn status_for(&self, i_n: f64, rating_count: u32) -> NoteStatus {
        if rating_count < self.min_ratings {
            NoteStatus::NeedsMoreRatings
        } else if i_n >= self.helpful {
            NoteStatus::Helpful
        } else if i_n <= self.not_helpful {
            NoteStatus::NotHelpful
        } else {
            NoteStatus::NeedsMoreRatings
        }
    }
}

pub fn classify_note(
    model: &BridgingModel,
    note: NoteId,
    rating_count: u32,
    thresholds: &StatusThresholds,
) -> Result<NoteStatus, BridgeError> {
    thresholds.validate()?;
    let i_n = model.note_intercept(note).ok_or(BridgeError::UnknownEntity {
        kind: EntityKind::Note,
        id: note.0,
    })?;
    Ok(thresholds.status_for(i_n, rating_count))
}
