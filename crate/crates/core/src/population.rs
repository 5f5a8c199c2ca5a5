//! Synthetic rater population and human rating behaviour.
//!
//! A rater's utility for a note is linear in perceived accuracy, polish and
//! viewpoint/slant alignment. Perceived accuracy is where polish can leak
//! into judged quality: without assistance a rater sees
//! `accuracy + polish_bias * (polish - 0.5)`; with full assistance they see
//! the true accuracy.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::{CritiqueDimension, CritiqueDirection, CritiqueToken, Rating, RatingLevel, RatingTag};
use crate::ids::RaterId;
use crate::math::{clamp_signed, dot, normal_cdf};
use crate::rng::{substream, tag};
use crate::writers::NoteVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaterProfile {
    pub rater_id: RaterId,
    pub viewpoint: Vec<f64>,
    pub leniency: f64,
    pub accuracy_weight: f64,
    pub polish_weight: f64,
    pub alignment_weight: f64,
    pub noise_sd: f64,
    pub capacity_per_round: u32,
    pub assist_quality: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Faction {
    pub weight: f64,
    pub viewpoint_mean: Vec<f64>,
    pub viewpoint_sd: f64,
}

/// Normal distribution over a behavioural trait.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraitDist {
    pub mean: f64,
    pub sd: f64,
}

impl TraitDist {
    pub const fn fixed(mean: f64) -> Self {
        Self { mean, sd: 0.0 }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean + self.sd * z
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorConfig {
    pub leniency: TraitDist,
    pub accuracy_weight: TraitDist,
    pub polish_weight: TraitDist,
    pub alignment_weight: TraitDist,
    pub noise_sd: TraitDist,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        Self {
            leniency: TraitDist { mean: -0.5, sd: 0.1 },
            accuracy_weight: TraitDist { mean: 2.0, sd: 0.3 },
            polish_weight: TraitDist { mean: 0.2, sd: 0.05 },
            alignment_weight: TraitDist { mean: 0.5, sd: 0.1 },
            noise_sd: TraitDist { mean: 0.25, sd: 0.0 },
        }
    }
}

/// Per-round rating capacity, uniform on `min..=max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityDist {
    pub min: u32,
    pub max: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    pub n_raters: u32,
    pub factions: Vec<Faction>,
    pub behavior: BehaviorConfig,
    pub capacity: CapacityDist,
    pub assist_quality: f64,
    pub seed: u64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            n_raters: 200,
            factions: alloc::vec![
                Faction {
                    weight: 0.5,
                    viewpoint_mean: alloc::vec![0.8],
                    viewpoint_sd: 0.15,
                },
                Faction {
                    weight: 0.5,
                    viewpoint_mean: alloc::vec![-0.8],
                    viewpoint_sd: 0.15,
                },
            ],
            behavior: BehaviorConfig::default(),
            capacity: CapacityDist { min: 2, max: 6 },
            assist_quality: 0.0,
            seed: 0,
        }
    }
}

impl PopulationConfig {
    pub fn viewpoint_dim(&self) -> usize {
        self.factions.first().map_or(0, |f| f.viewpoint_mean.len())
    }

    pub fn validate(&self) -> Result<(), PopulationError> {
        let bad = |f: &'static str| Err(PopulationError::InvalidConfig(f));
        if self.n_raters == 0 {
            return bad("n_raters");
        }
        if self.factions.is_empty() {
            return bad("factions");
        }
        let dim = self.viewpoint_dim();
        let mut total = 0.0;
        for f in &self.factions {
            if !(f.weight >= 0.0) || !f.weight.is_finite() {
                return bad("factions.weight");
            }
            if f.viewpoint_mean.len() != dim || dim == 0 {
                return bad("factions.viewpoint_mean");
            }
            if !(f.viewpoint_sd >= 0.0) || !f.viewpoint_sd.is_finite() {
                return bad("factions.viewpoint_sd");
            }
            total += f.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return bad("factions.weight");
        }
        let b = &self.behavior;
        for (name, d) in [
            ("behavior.leniency", b.leniency),
            ("behavior.accuracy_weight", b.accuracy_weight),
            ("behavior.polish_weight", b.polish_weight),
            ("behavior.alignment_weight", b.alignment_weight),
            ("behavior.noise_sd", b.noise_sd),
        ] {
            if !d.mean.is_finite() || !(d.sd >= 0.0) || !d.sd.is_finite() {
                return bad(name);
            }
        }
        if self.capacity.min > self.capacity.max {
            return bad("capacity");
        }
        if !(0.0..=1.0).contains(&self.assist_quality) {
            return bad("assist_quality");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum PopulationError {
    #[error("invalid population config: {0}")]
    InvalidConfig(&'static str),
    #[error("viewpoint has dimension {viewpoint} but note slant has dimension {slant}")]
    DimensionError { viewpoint: usize, slant: usize },
    #[error("invalid rating thresholds: somewhat-helpful threshold must be below helpful")]
    InvalidThresholds,
}

/// Draws the population. Rater `i` gets id `i` and its own substream, so
/// profiles do not depend on each other.
pub fn sample_population(config: &PopulationConfig) -> Result<Vec<RaterProfile>, PopulationError> {
    config.validate()?;
    let b = &config.behavior;
    let profiles = (0..config.n_raters as u64)
        .map(|i| {
            let mut rng = substream(config.seed, &[tag::POPULATION, i]);
            let pick: f64 = rng.random();
            let mut acc = 0.0;
            let mut faction = &config.factions[config.factions.len() - 1];
            for f in &config.factions {
                acc += f.weight;
                if pick < acc {
                    faction = f;
                    break;
                }
            }
            let viewpoint = faction
                .viewpoint_mean
                .iter()
                .map(|m| {
                    let z: f64 = rng.sample(StandardNormal);
                    clamp_signed(m + faction.viewpoint_sd * z)
                })
                .collect();
            let leniency = b.leniency.sample(&mut rng);
            let accuracy_weight = b.accuracy_weight.sample(&mut rng).max(0.0);
            let polish_weight = b.polish_weight.sample(&mut rng).max(0.0);
            let alignment_weight = b.alignment_weight.sample(&mut rng).max(0.0);
            let noise_sd = b.noise_sd.sample(&mut rng).max(0.0);
            let capacity_per_round = rng.random_range(config.capacity.min..=config.capacity.max);
            RaterProfile {
                rater_id: RaterId(i),
                viewpoint,
                leniency,
                accuracy_weight,
                polish_weight,
                alignment_weight,
                noise_sd,
                capacity_per_round,
                assist_quality: config.assist_quality,
            }
        })
        .collect();
    Ok(profiles)
}

/// What the rater believes the note's accuracy to be.
pub fn perceived_accuracy(rater: &RaterProfile, note: &NoteVector, polish_bias: f64) -> f64 {
    let q = rater.assist_quality;
    q * note.accuracy + (1.0 - q) * (note.accuracy + polish_bias * (note.polish - 0.5))
}

/// The additive pieces of a rater's utility for a note.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtilityBreakdown {
    pub leniency: f64,
    pub accuracy: f64,
    pub polish: f64,
    pub alignment: f64,
}

impl UtilityBreakdown {
    pub fn total(&self) -> f64 {
        self.leniency + self.accuracy + self.polish + self.alignment
    }

    /// Critique for the most negative contribution; ties resolve in the
    /// order accuracy, slant, polish. `None` if nothing is negative.
    pub fn critique(&self) -> Option<CritiqueToken> {
        let candidates = [
            (CritiqueDimension::Accuracy, self.accuracy, CritiqueDirection::TooLow),
            (CritiqueDimension::Slant, self.alignment, CritiqueDirection::TooHigh),
            (CritiqueDimension::Polish, self.polish, CritiqueDirection::TooLow),
        ];
        let mut best: Option<(CritiqueDimension, f64, CritiqueDirection)> = None;
        for c in candidates {
            if c.1 < 0.0 && best.is_none_or(|b| c.1 < b.1) {
                best = Some(c);
            }
        }
        best.map(|(dimension, _, direction)| CritiqueToken { dimension, direction })
    }
}

pub fn utility_breakdown(
    rater: &RaterProfile,
    note: &NoteVector,
    polish_bias: f64,
) -> Result<UtilityBreakdown, PopulationError> {
    if rater.viewpoint.len() != note.slant.len() {
        return Err(PopulationError::DimensionError {
            viewpoint: rater.viewpoint.len(),
            slant: note.slant.len(),
        });
    }
    Ok(UtilityBreakdown {
        leniency: rater.leniency,
        accuracy: rater.accuracy_weight * (perceived_accuracy(rater, note, polish_bias) - 0.5),
        polish: rater.polish_weight * (note.polish - 0.5),
        alignment: rater.alignment_weight * dot(&rater.viewpoint, &note.slant),
    })
}

/// Deterministic utility of a note to a rater (noise is added when rating).
pub fn rating_utility(rater: &RaterProfile, note: &NoteVector, polish_bias: f64) -> Result<f64, PopulationError> {
    utility_breakdown(rater, note, polish_bias).map(|b| b.total())
}

/// Cut points on `utility + noise`: Helpful at or above `helpful`,
/// SomewhatHelpful at or above `somewhat`, NotHelpful below.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatingThresholds {
    pub helpful: f64,
    pub somewhat: f64,
}

impl Default for RatingThresholds {
    fn default() -> Self {
        Self {
            helpful: 0.5,
            somewhat: 0.1,
        }
    }
}

impl RatingThresholds {
    pub fn validate(&self) -> Result<(), PopulationError> {
        if self.somewhat < self.helpful {
            Ok(())
        } else {
            Err(PopulationError::InvalidThresholds)
        }
    }

    pub fn level_for(&self, value: f64) -> RatingLevel {
        if value >= self.helpful {
            RatingLevel::Helpful
        } else if value >= self.somewhat {
            RatingLevel::SomewhatHelpful
        } else {
            RatingLevel::NotHelpful
        }
    }
}

/// Closed-form `[P(Helpful), P(SomewhatHelpful), P(NotHelpful)]` for a rater
/// with utility `utility` and noise sd `noise_sd`.
pub fn level_probabilities(utility: f64, noise_sd: f64, thresholds: &RatingThresholds) -> [f64; 3] {
    if noise_sd == 0.0 {
        let mut p = [0.0; 3];
        p[match thresholds.level_for(utility) {
            RatingLevel::Helpful => 0,
            RatingLevel::SomewhatHelpful => 1,
            RatingLevel::NotHelpful => 2,
        }] = 1.0;
        return p;
    }
    let below_h = normal_cdf((thresholds.helpful - utility) / noise_sd);
    let below_s = normal_cdf((thresholds.somewhat - utility) / noise_sd);
    [1.0 - below_h, below_h - below_s, below_s]
}

/// One human rating. `rng` should be the `(round, rater, note)` substream.
pub fn simulate_rating<R: Rng + ?Sized>(
    rater: &RaterProfile,
    note: &NoteVector,
    thresholds: &RatingThresholds,
    polish_bias: f64,
    round: u32,
    rng: &mut R,
) -> Result<Rating, PopulationError> {
    thresholds.validate()?;
    let parts = utility_breakdown(rater, note, polish_bias)?;
    let z: f64 = rng.sample(StandardNormal);
    let level = thresholds.level_for(parts.total() + rater.noise_sd * z);
    let mut rating = Rating::new(rater.rater_id, note.note_id, level, round);
    if level != RatingLevel::Helpful {
        if let Some(token) = parts.critique() {
            rating.critique = Some(token);
            rating.tags.insert(match token.dimension {
                CritiqueDimension::Accuracy => RatingTag::IncorrectInformation,
                CritiqueDimension::Slant => RatingTag::ArgumentativeOrBiasedLanguage,
                CritiqueDimension::Polish => RatingTag::Other,
            });
        }
    }
    Ok(rating)
}

/// Copy of `rater` with assistance quality `assist_quality`.
pub fn apply_rater_assistance(rater: &RaterProfile, assist_quality: f64) -> Result<RaterProfile, PopulationError> {
    if !(0.0..=1.0).contains(&assist_quality) {
        return Err(PopulationError::InvalidConfig("assist_quality"));
    }
    Ok(RaterProfile {
        assist_quality,
        ..rater.clone()
    })
}
