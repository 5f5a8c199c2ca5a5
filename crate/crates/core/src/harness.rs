//! The round loop.
//!
//! Each round runs, in order: post creation, note writing (plus replayed
//! external submissions), curation (matching, adaptation, prescreening and
//! rater allocation), human rating, and on the refit cadence a full
//! bridging refit, status classification and one RLCF update per FullyAI
//! policy. Ratings are only ever produced by [`simulate_rating`] on a
//! [`RaterProfile`]; there is no other rating path.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::{
    fit_bridging, fit_bridging_with_origins, BridgeError, BridgingModel, FitConfig, NoteStatus, Rating,
    StatusThresholds,
};
use crate::curation::{
    adapt_note, allocate_raters, cluster_notes, match_note, CurationError, MatchDecision, MatchThresholds,
    PendingNote,
};
use crate::ids::{NoteId, NoteOrigin, PostId, RaterId, WriterId};
use crate::math::{exp, norm};
use crate::population::{
    sample_population, simulate_rating, PopulationConfig, PopulationError, RaterProfile, RatingThresholds,
};
use crate::rlcf::{
    hacking_gap, homogenization_index, observations_from_ratings, policy_reward, rlcf_update,
    train_reward_model, PolicyUpdateConfig, RewardModel, RlcfError,
};
use crate::rng::{derive_seed, substream, tag};
use crate::stats::mean;
use crate::writers::{
    generate_note, ingest_submission, select_posts, ExternalSubmission, IngestError, NoteShape, NoteVector,
    Post, SelectionWeights, SubmissionRegistry, WriterError, WriterPolicy,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostsPerRound {
    pub min: u32,
    pub max: u32,
}

/// The "this match is inappropriate" channel for adapted notes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchGovernance {
    /// Objection probability for an adapted note sitting exactly at the
    /// adapt threshold; falls linearly to zero at the reuse threshold.
    pub objection_rate: f64,
    /// Share of objections among all votes that retires a match.
    pub retire_fraction: f64,
    pub min_votes: u32,
}

impl Default for MatchGovernance {
    fn default() -> Self {
        Self {
            objection_rate: 0.3,
            retire_fraction: 0.5,
            min_votes: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub rounds: u32,
    pub posts_per_round: PostsPerRound,
    pub claim_dim: usize,
    pub style_dim: usize,
    pub flag_probability: f64,
    /// Chance that a new post restates an earlier post's claim.
    pub repeat_probability: f64,
    /// Per-coordinate noise added to a restated claim.
    pub repeat_noise: f64,
    /// Rounds after creation during which writers still consider a post.
    pub post_lifetime: u32,
    /// Rounds after creation during which a note's status is still
    /// recomputed at refits; afterwards it is frozen.
    pub score_window: u32,
    pub population: PopulationConfig,
    pub writers: Vec<WriterPolicy>,
    pub fit: FitConfig,
    pub status: StatusThresholds,
    pub rating: RatingThresholds,
    pub matching: MatchThresholds,
    pub governance: MatchGovernance,
    pub policy_update: PolicyUpdateConfig,
    pub k_archetypes: usize,
    pub selection: SelectionWeights,
    pub ratings_per_note: u32,
    /// Notes per post offered for rating in one round (prescreening).
    pub prescreen_m: u32,
    pub polish_bias: f64,
    pub refit_every: u32,
    pub ingest_file: Option<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let population = PopulationConfig::default();
        let dv = population.viewpoint_dim();
        let ds = 4;
        let mut left = WriterPolicy::human(WriterId(0), dv, ds);
        left.params.slant_bias = vec![0.2; dv];
        left.params.style_mean = vec![0.5; ds];
        let mut right = WriterPolicy::human(WriterId(1), dv, ds);
        right.params.slant_bias = vec![-0.2; dv];
        right.params.style_mean = vec![-0.5; ds];
        let assisted = WriterPolicy::human_ai_assisted(WriterId(2), dv, ds);
        let ai = WriterPolicy::fully_ai(WriterId(3), dv, ds);
        Self {
            seed: 1,
            rounds: 50,
            posts_per_round: PostsPerRound { min: 8, max: 12 },
            claim_dim: 8,
            style_dim: ds,
            flag_probability: 0.2,
            repeat_probability: 0.1,
            repeat_noise: 0.3,
            post_lifetime: 10,
            score_window: 15,
            population,
            writers: vec![left, right, assisted, ai],
            fit: FitConfig::default(),
            status: StatusThresholds::default(),
            rating: RatingThresholds::default(),
            matching: MatchThresholds::default(),
            governance: MatchGovernance::default(),
            policy_update: PolicyUpdateConfig::default(),
            k_archetypes: 4,
            selection: SelectionWeights::default(),
            ratings_per_note: 10,
            prescreen_m: 5,
            polish_bias: 0.0,
            refit_every: 5,
            ingest_file: None,
        }
    }
}

/// Validation failure, naming the offending field by its config path.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invalid config field `{field}`: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, reason: impl fmt::Display) -> Self {
        Self {
            field: field.into(),
            reason: format!("{reason}"),
        }
    }
}

impl ScenarioConfig {
    pub fn viewpoint_dim(&self) -> usize {
        self.population.viewpoint_dim()
    }

    /// Sets the scenario seed and every nested seed.
    pub fn set_all_seeds(&mut self, seed: u64) {
        self.seed = seed;
        self.population.seed = derive_seed(seed, &[tag::POPULATION]);
        self.fit.seed = derive_seed(seed, &[tag::FIT_INIT]);
        self.policy_update.seed = derive_seed(seed, &[tag::RLCF]);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.rounds == 0 {
            return Err(ConfigError::new("rounds", "must be at least 1"));
        }
        if self.refit_every == 0 || self.refit_every > self.rounds {
            return Err(ConfigError::new("refit_every", "must be in 1..=rounds"));
        }
        if self.posts_per_round.min > self.posts_per_round.max {
            return Err(ConfigError::new("posts_per_round", "min exceeds max"));
        }
        if self.claim_dim == 0 {
            return Err(ConfigError::new("claim_dim", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.flag_probability) {
            return Err(ConfigError::new("flag_probability", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.repeat_probability) {
            return Err(ConfigError::new("repeat_probability", "must be in [0, 1]"));
        }
        if !(self.repeat_noise >= 0.0) || !self.repeat_noise.is_finite() {
            return Err(ConfigError::new("repeat_noise", "must be finite and nonnegative"));
        }
        if self.post_lifetime == 0 {
            return Err(ConfigError::new("post_lifetime", "must be at least 1"));
        }
        if self.score_window == 0 {
            return Err(ConfigError::new("score_window", "must be at least 1"));
        }
        self.population.validate().map_err(|e| match e {
            PopulationError::InvalidConfig(f) => ConfigError::new(format!("population.{f}"), "out of range"),
            other => ConfigError::new("population", other),
        })?;
        let dv = self.viewpoint_dim();
        let mut ids = BTreeSet::new();
        for (i, w) in self.writers.iter().enumerate() {
            w.validate(dv, self.style_dim).map_err(|e| match e {
                WriterError::InvalidConfig(f) => ConfigError::new(format!("writers[{i}].{f}"), "out of range"),
            })?;
            if !ids.insert(w.writer_id) || w.writer_id == WriterId::EXTERNAL {
                return Err(ConfigError::new(format!("writers[{i}].writer_id"), "duplicate or reserved id"));
            }
        }
        self.fit.validate().map_err(|e| match e {
            BridgeError::InvalidConfig(f) => ConfigError::new(format!("fit.{f}"), "out of range"),
            other => ConfigError::new("fit", other),
        })?;
        self.status.validate().map_err(|e| ConfigError::new("status", e))?;
        self.rating.validate().map_err(|e| ConfigError::new("rating", e))?;
        self.matching.validate().map_err(|e| ConfigError::new("matching", e))?;
        let g = &self.governance;
        if !(0.0..=1.0).contains(&g.objection_rate) {
            return Err(ConfigError::new("governance.objection_rate", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&g.retire_fraction) {
            return Err(ConfigError::new("governance.retire_fraction", "must be in [0, 1]"));
        }
        self.policy_update.validate().map_err(|e| match e {
            RlcfError::InvalidConfig(f) => ConfigError::new(format!("policy_update.{f}"), "out of range"),
            other => ConfigError::new("policy_update", other),
        })?;
        if self.k_archetypes == 0 {
            return Err(ConfigError::new("k_archetypes", "must be at least 1"));
        }
        self.selection.validate().map_err(|e| ConfigError::new("selection", e))?;
        if self.ratings_per_note == 0 {
            return Err(ConfigError::new("ratings_per_note", "must be at least 1"));
        }
        if self.prescreen_m == 0 {
            return Err(ConfigError::new("prescreen_m", "must be at least 1"));
        }
        if !self.polish_bias.is_finite() {
            return Err(ConfigError::new("polish_bias", "must be finite"));
        }
        Ok(())
    }
}

/// One row of the per-round metrics table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub round: u32,
    pub notes_created_human: u64,
    pub notes_created_assisted: u64,
    pub notes_created_ai: u64,
    pub notes_created_total: u64,
    pub notes_published_human: u64,
    pub notes_published_assisted: u64,
    pub notes_published_ai: u64,
    pub notes_published_total: u64,
    pub status_helpful: u64,
    pub status_not_helpful: u64,
    pub status_needs_more: u64,
    pub human_share_published: f64,
    pub ttp_human: Option<f64>,
    pub ttp_assisted: Option<f64>,
    pub ttp_ai: Option<f64>,
    pub coverage: f64,
    pub overload: f64,
    pub corr_accuracy: Option<f64>,
    pub corr_polish: Option<f64>,
    pub mean_published_accuracy: Option<f64>,
    /// Same correlations over every note the current model scores.
    pub corr_accuracy_scored: Option<f64>,
    pub corr_polish_scored: Option<f64>,
    pub homogenization_index: f64,
    pub mean_published_intercept: Option<f64>,
    pub reuse_count: u64,
    pub adapt_count: u64,
    pub match_retirements: u64,
    pub dedup_posts: u64,
    pub pending_notes: u64,
    pub ratings_this_round: u64,
    pub ratings_total: u64,
    pub external_ingested: u64,
}

impl MetricsRecord {
    /// CSV column order; matches the field order.
    pub const COLUMNS: [&'static str; 33] = [
        "round",
        "notes_created_human",
        "notes_created_assisted",
        "notes_created_ai",
        "notes_created_total",
        "notes_published_human",
        "notes_published_assisted",
        "notes_published_ai",
        "notes_published_total",
        "status_helpful",
        "status_not_helpful",
        "status_needs_more",
        "human_share_published",
        "ttp_human",
        "ttp_assisted",
        "ttp_ai",
        "coverage",
        "overload",
        "corr_accuracy",
        "corr_polish",
        "mean_published_accuracy",
        "corr_accuracy_scored",
        "corr_polish_scored",
        "homogenization_index",
        "mean_published_intercept",
        "reuse_count",
        "adapt_count",
        "match_retirements",
        "dedup_posts",
        "pending_notes",
        "ratings_this_round",
        "ratings_total",
        "external_ingested",
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub round: u32,
    pub model: BridgingModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardSnapshot {
    pub round: u32,
    pub model: RewardModel,
}

/// Policy parameters after an RLCF update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub round: u32,
    pub writer_id: WriterId,
    pub reward: f64,
    pub expected_intercept: f64,
    pub novelty: f64,
    pub theta: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Setup,
    Posts,
    Writing,
    Ingest,
    Curation,
    Rating,
    Scoring,
    Rlcf,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Setup => "setup",
            Stage::Posts => "posts",
            Stage::Writing => "writing",
            Stage::Ingest => "ingest",
            Stage::Curation => "curation",
            Stage::Rating => "rating",
            Stage::Scoring => "scoring",
            Stage::Rlcf => "rlcf",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum StageError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error(transparent)]
    Writer(#[from] WriterError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Curation(#[from] CurationError),
    #[error(transparent)]
    Rlcf(#[from] RlcfError),
    #[error("invariant violated: {0}")]
    Invariant(&'static str),
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("round {round}, stage {stage}: {source}")]
pub struct HarnessError {
    pub round: u32,
    pub stage: Stage,
    pub source: StageError,
}

/// Everything a run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOutput {
    pub records: Vec<MetricsRecord>,
    pub snapshots: Vec<ModelSnapshot>,
    pub reward_models: Vec<RewardSnapshot>,
    pub trajectory: Vec<TrajectoryRow>,
    pub population: Vec<RaterProfile>,
    pub notes: BTreeMap<NoteId, NoteVector>,
    pub statuses: BTreeMap<NoteId, NoteStatus>,
    pub ratings: Vec<Rating>,
    /// Rounds from post creation to first Helpful status, per note.
    pub publish_delays: BTreeMap<NoteId, u32>,
    pub final_policies: Vec<WriterPolicy>,
}

impl ScenarioOutput {
    /// Mean post-to-publication delay over every note of `origin` published
    /// during the run.
    pub fn mean_time_to_publish(&self, origin: NoteOrigin) -> Option<f64> {
        let delays: Vec<f64> = self
            .publish_delays
            .iter()
            .filter(|(id, _)| self.notes[*id].origin == origin)
            .map(|(_, d)| f64::from(*d))
            .collect();
        mean(&delays)
    }

    pub fn published(&self) -> Vec<&NoteVector> {
        self.statuses
            .iter()
            .filter(|(_, s)| **s == NoteStatus::Helpful)
            .map(|(id, _)| &self.notes[id])
            .collect()
    }
}

/// Mutable simulation state. [`run_scenario`] drives it round by round;
/// stepping it directly lets callers inspect state between rounds.
pub struct Ecosystem {
    config: ScenarioConfig,
    population: Vec<RaterProfile>,
    rater_index: BTreeMap<RaterId, usize>,
    policies: Vec<WriterPolicy>,
    posts: BTreeMap<PostId, Post>,
    notes: BTreeMap<NoteId, NoteVector>,
    statuses: BTreeMap<NoteId, NoteStatus>,
    ratings: Vec<Rating>,
    rating_counts: BTreeMap<NoteId, u32>,
    already_rated: BTreeSet<(RaterId, NoteId)>,
    noted_by: BTreeSet<(WriterId, PostId)>,
    targeted: BTreeSet<PostId>,
    reused: BTreeMap<PostId, NoteId>,
    adapted_similarity: BTreeMap<NoteId, f64>,
    objections: BTreeMap<NoteId, u32>,
    retired: BTreeSet<NoteId>,
    publish_round: BTreeMap<NoteId, u32>,
    registry: SubmissionRegistry,
    external_queue: VecDeque<ExternalSubmission>,
    model: Option<BridgingModel>,
    next_note: u64,
    next_post: u64,
    round: u32,
    records: Vec<MetricsRecord>,
    snapshots: Vec<ModelSnapshot>,
    reward_models: Vec<RewardSnapshot>,
    trajectory: Vec<TrajectoryRow>,
    publish_delays: BTreeMap<NoteId, u32>,
}

#[derive(Default)]
struct RoundTally {
    created: [u64; 3],
    newly_published: Vec<NoteId>,
    reuse: u64,
    adapt: u64,
    retirements: u64,
    dedup_posts: u64,
    pending: u64,
    overload: f64,
    ratings: u64,
    ingested: u64,
}

impl Ecosystem {
    pub fn new(config: ScenarioConfig, external: Vec<ExternalSubmission>) -> Result<Self, HarnessError> {
        let setup = |source: StageError| HarnessError {
            round: 0,
            stage: Stage::Setup,
            source,
        };
        config.validate().map_err(|e| setup(e.into()))?;
        let population = sample_population(&config.population).map_err(|e| setup(e.into()))?;
        let rater_index = population.iter().enumerate().map(|(i, r)| (r.rater_id, i)).collect();
        let policies = config.writers.clone();
        Ok(Self {
            config,
            population,
            rater_index,
            policies,
            posts: BTreeMap::new(),
            notes: BTreeMap::new(),
            statuses: BTreeMap::new(),
            ratings: Vec::new(),
            rating_counts: BTreeMap::new(),
            already_rated: BTreeSet::new(),
            noted_by: BTreeSet::new(),
            targeted: BTreeSet::new(),
            reused: BTreeMap::new(),
            adapted_similarity: BTreeMap::new(),
            objections: BTreeMap::new(),
            retired: BTreeSet::new(),
            publish_round: BTreeMap::new(),
            registry: SubmissionRegistry::new(),
            external_queue: external.into(),
            model: None,
            next_note: 0,
            next_post: 0,
            round: 0,
            records: Vec::new(),
            snapshots: Vec::new(),
            reward_models: Vec::new(),
            trajectory: Vec::new(),
            publish_delays: BTreeMap::new(),
        })
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn is_done(&self) -> bool {
        self.round >= self.config.rounds
    }

    pub fn notes(&self) -> &BTreeMap<NoteId, NoteVector> {
        &self.notes
    }

    pub fn statuses(&self) -> &BTreeMap<NoteId, NoteStatus> {
        &self.statuses
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn population(&self) -> &[RaterProfile] {
        &self.population
    }

    pub fn records(&self) -> &[MetricsRecord] {
        &self.records
    }

    pub fn model(&self) -> Option<&BridgingModel> {
        self.model.as_ref()
    }

    pub fn policies(&self) -> &[WriterPolicy] {
        &self.policies
    }

    fn shape(&self) -> NoteShape {
        NoteShape {
            viewpoint_dim: self.config.viewpoint_dim(),
            style_dim: self.config.style_dim,
            claim_dim: self.config.claim_dim,
        }
    }

    fn fresh_note_id(&mut self) -> NoteId {
        let id = NoteId(self.next_note);
        self.next_note += 1;
        id
    }

    fn add_note(&mut self, note: NoteVector, tally: &mut RoundTally) {
        tally.created[note.origin.index()] += 1;
        self.targeted.insert(note.post_id);
        self.statuses.insert(note.note_id, NoteStatus::NeedsMoreRatings);
        self.notes.insert(note.note_id, note);
    }

    fn is_covered(&self, post: PostId, covered: &BTreeSet<PostId>) -> bool {
        covered.contains(&post) || self.reused.contains_key(&post)
    }

    fn covered_posts(&self) -> BTreeSet<PostId> {
        self.statuses
            .iter()
            .filter(|(_, s)| **s == NoteStatus::Helpful)
            .map(|(id, _)| self.notes[id].post_id)
            .collect()
    }

    fn helpful_notes(&self) -> Vec<NoteVector> {
        self.statuses
            .iter()
            .filter(|(_, s)| **s == NoteStatus::Helpful)
            .map(|(id, _)| self.notes[id].clone())
            .collect()
    }

    /// Runs one full round and returns its metrics.
    pub fn step(&mut self) -> Result<MetricsRecord, HarnessError> {
        let round = self.round;
        let err = |stage: Stage| move |e: StageError| HarnessError { round, stage, source: e };
        let mut tally = RoundTally::default();

        let new_posts = self.spawn_posts(round);
        self.write_notes(round, &mut tally).map_err(|e| err(Stage::Writing)(e))?;
        self.ingest_external(round, &mut tally).map_err(|e| err(Stage::Ingest)(e))?;
        self.curate(round, &new_posts, &mut tally).map_err(|e| err(Stage::Curation)(e))?;
        if (round + 1).is_multiple_of(self.config.refit_every) && !self.ratings.is_empty() {
            self.refit(round, &mut tally).map_err(|e| err(Stage::Scoring)(e))?;
        }
        self.rlcf(round).map_err(|e| err(Stage::Rlcf)(e))?;
        let record = self.metrics(round, &tally).map_err(|e| err(Stage::Scoring)(e))?;
        self.records.push(record.clone());
        self.round += 1;
        if self.is_done() && !self.external_queue.is_empty() {
            warn!(
                "{} external submissions never matched a post",
                self.external_queue.len()
            );
        }
        Ok(record)
    }

    pub fn finish(self) -> ScenarioOutput {
        ScenarioOutput {
            records: self.records,
            snapshots: self.snapshots,
            reward_models: self.reward_models,
            trajectory: self.trajectory,
            population: self.population,
            notes: self.notes,
            statuses: self.statuses,
            ratings: self.ratings,
            publish_delays: self.publish_delays,
            final_policies: self.policies,
        }
    }

    fn spawn_posts(&mut self, round: u32) -> Vec<PostId> {
        let mut rng = substream(self.config.seed, &[tag::POSTS, u64::from(round)]);
        let ppr = self.config.posts_per_round;
        let count = rng.random_range(ppr.min..=ppr.max);
        let mut ids = Vec::with_capacity(count as usize);
        let earlier = self.next_post;
        for _ in 0..count {
            let repeat = earlier > 0 && rng.random_bool(self.config.repeat_probability);
            let mut claim: Vec<f64> = if repeat {
                let source = &self.posts[&PostId(rng.random_range(0..earlier))].claim;
                source
                    .iter()
                    .map(|c| c + self.config.repeat_noise * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            } else {
                (0..self.config.claim_dim).map(|_| rng.sample(StandardNormal)).collect()
            };
            if norm(&claim) == 0.0 {
                claim[0] = 1.0;
            }
            let z: f64 = rng.sample(StandardNormal);
            let post = Post {
                post_id: PostId(self.next_post),
                claim,
                reach: exp(z),
                mislead_likelihood: rng.random(),
                flagged: rng.random_bool(self.config.flag_probability),
                round_created: round,
            };
            self.next_post += 1;
            ids.push(post.post_id);
            self.posts.insert(post.post_id, post);
        }
        ids
    }

    fn write_notes(&mut self, round: u32, tally: &mut RoundTally) -> Result<(), StageError> {
        let covered = self.covered_posts();
        for wi in 0..self.policies.len() {
            let policy = self.policies[wi].clone();
            if policy.notes_per_round == 0 {
                continue;
            }
            let candidates: Vec<Post> = self
                .posts
                .values()
                .filter(|p| {
                    p.round_created + policy.latency_rounds <= round
                        && round < p.round_created + self.config.post_lifetime
                        && !self.noted_by.contains(&(policy.writer_id, p.post_id))
                        && !self.is_covered(p.post_id, &covered)
                })
                .cloned()
                .collect();
            let chosen = select_posts(&candidates, &self.config.selection, policy.notes_per_round as usize)?;
            for post_id in chosen {
                let note_id = self.fresh_note_id();
                let mut rng = substream(
                    self.config.seed,
                    &[tag::WRITE, u64::from(round), policy.writer_id.0, post_id.0],
                );
                let note = generate_note(&policy, &self.posts[&post_id], note_id, round, &mut rng);
                self.noted_by.insert((policy.writer_id, post_id));
                self.add_note(note, tally);
            }
        }
        Ok(())
    }

    fn ingest_external(&mut self, round: u32, tally: &mut RoundTally) -> Result<(), StageError> {
        let shape = self.shape();
        let mut waiting = VecDeque::new();
        while let Some(sub) = self.external_queue.pop_front() {
            let note_id = NoteId(self.next_note);
            match ingest_submission(&sub, &self.posts, &mut self.registry, shape, note_id, round) {
                Ok(note) => {
                    self.next_note += 1;
                    tally.ingested += 1;
                    self.add_note(note, tally);
                }
                Err(IngestError::UnknownPost(_)) => waiting.push_back(sub),
                Err(e) => warn!("dropping external submission {:?}: {e}", sub.submission_id),
            }
        }
        self.external_queue = waiting;
        Ok(())
    }

    fn curate(&mut self, round: u32, new_posts: &[PostId], tally: &mut RoundTally) -> Result<(), StageError> {
        // Contextual matching of this round's posts against published notes.
        let corpus = self.helpful_notes();
        for post_id in new_posts {
            let post = self.posts[post_id].clone();
            let m = match_note(&post, &corpus, &self.config.matching)?;
            match (m.decision, m.note_id, m.similarity) {
                (MatchDecision::Reuse, Some(src), _) => {
                    self.reused.insert(post.post_id, src);
                    self.targeted.insert(post.post_id);
                    tally.reuse += 1;
                }
                (MatchDecision::Adapt, Some(src), Some(sim)) => {
                    let id = self.fresh_note_id();
                    let adapted = adapt_note(&self.notes[&src], &post, self.config.matching.adapt, sim, id, round)?;
                    self.adapted_similarity.insert(id, sim);
                    self.add_note(adapted, tally);
                    tally.adapt += 1;
                }
                _ => {}
            }
        }

        // Prescreening: per post, a diverse subset of the notes still waiting.
        let rpn = self.config.ratings_per_note;
        let mut by_post: BTreeMap<PostId, Vec<NoteVector>> = BTreeMap::new();
        for (id, status) in &self.statuses {
            let received = self.rating_counts.get(id).copied().unwrap_or(0);
            if *status == NoteStatus::NeedsMoreRatings && !self.retired.contains(id) && received < rpn {
                let n = &self.notes[id];
                by_post.entry(n.post_id).or_default().push(n.clone());
            }
        }
        let mut pending = Vec::new();
        for (post_id, notes) in &by_post {
            let selection = cluster_notes(notes, self.config.prescreen_m as usize)?;
            if selection.dedup {
                tally.dedup_posts += 1;
            }
            let post = &self.posts[post_id];
            for id in selection.note_ids {
                let received = self.rating_counts.get(&id).copied().unwrap_or(0);
                let age = round - self.notes[&id].round_created;
                pending.push(PendingNote {
                    note_id: id,
                    priority: post.reach * (0.5 + post.mislead_likelihood) / f64::from(1 + age),
                    demand: rpn - received,
                });
            }
        }

        // Rotate the rater order each round so the same raters are not always
        // offered the top notes first.
        let n = self.population.len();
        let offset = (round as usize).wrapping_mul(7919) % n.max(1);
        let raters: Vec<(RaterId, u32)> = (0..n)
            .map(|i| {
                let r = &self.population[(i + offset) % n];
                (r.rater_id, r.capacity_per_round)
            })
            .collect();
        let assignment = allocate_raters(&pending, &raters, &self.already_rated);
        assignment.validate(&raters, &self.already_rated)?;
        tally.pending = pending.len() as u64;
        tally.overload = if pending.is_empty() {
            0.0
        } else {
            assignment.shortfall(&pending) as f64 / pending.len() as f64
        };

        // Human-only rating.
        let gov = self.config.governance;
        let th = self.config.matching;
        for (rater_id, note_ids) in &assignment.by_rater {
            let rater = &self.population[self.rater_index[rater_id]];
            for note_id in note_ids {
                let note = &self.notes[note_id];
                if let Some(sim) = self.adapted_similarity.get(note_id) {
                    let span = th.reuse - th.adapt;
                    let p = if span > 0.0 {
                        gov.objection_rate * ((th.reuse - sim) / span).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let mut rng = substream(
                        self.config.seed,
                        &[tag::MATCH_VOTE, u64::from(round), rater_id.0, note_id.0],
                    );
                    if rng.random::<f64>() < p {
                        *self.objections.entry(*note_id).or_default() += 1;
                        *self.rating_counts.entry(*note_id).or_default() += 1;
                        self.already_rated.insert((*rater_id, *note_id));
                        continue;
                    }
                }
                let mut rng = substream(self.config.seed, &[tag::RATE, u64::from(round), rater_id.0, note_id.0]);
                let rating = simulate_rating(rater, note, &self.config.rating, self.config.polish_bias, round, &mut rng)?;
                if rating.rater_id != rater.rater_id || !self.already_rated.insert((*rater_id, *note_id)) {
                    return Err(StageError::Invariant("rating not attributable to a unique human rater"));
                }
                *self.rating_counts.entry(*note_id).or_default() += 1;
                self.ratings.push(rating);
                tally.ratings += 1;
            }
        }

        // Retire matches the raters object to.
        for (note_id, objections) in &self.objections {
            if self.retired.contains(note_id) {
                continue;
            }
            let votes = self.rating_counts.get(note_id).copied().unwrap_or(0);
            if votes >= gov.min_votes && f64::from(*objections) >= gov.retire_fraction * f64::from(votes) {
                self.retired.insert(*note_id);
                self.statuses.insert(*note_id, NoteStatus::NotHelpful);
                tally.retirements += 1;
            }
        }
        Ok(())
    }

    fn refit(&mut self, round: u32, tally: &mut RoundTally) -> Result<(), StageError> {
        let model = if self.config.fit.origin_aware {
            let origins = self.notes.iter().map(|(id, n)| (*id, n.origin)).collect();
            fit_bridging_with_origins(&self.ratings, &origins, &self.config.fit)?
        } else {
            fit_bridging(&self.ratings, &self.config.fit)?
        };
        let mut content_counts: BTreeMap<NoteId, u32> = BTreeMap::new();
        for r in &self.ratings {
            *content_counts.entry(r.note_id).or_default() += 1;
        }
        let window = self.config.score_window;
        for (id, status) in self.statuses.iter_mut() {
            if self.retired.contains(id) || round - self.notes[id].round_created >= window {
                continue;
            }
            *status = match model.note_intercept(*id) {
                Some(i_n) => self
                    .config
                    .status
                    .status_for(i_n, content_counts.get(id).copied().unwrap_or(0)),
                None => NoteStatus::NeedsMoreRatings,
            };
            if *status == NoteStatus::Helpful && !self.publish_round.contains_key(id) {
                self.publish_round.insert(*id, round);
                let post_round = self.posts[&self.notes[id].post_id].round_created;
                self.publish_delays.insert(*id, round - post_round);
                tally.newly_published.push(*id);
            }
        }
        self.snapshots.push(ModelSnapshot {
            round,
            model: model.clone(),
        });
        self.model = Some(model);
        Ok(())
    }

    /// Polish bias as the community perceives it on average, which is what
    /// the reward model's accuracy proxy should reflect.
    fn effective_polish_bias(&self) -> f64 {
        let assist = mean(&self.population.iter().map(|r| r.assist_quality).collect::<Vec<_>>()).unwrap_or(0.0);
        self.config.polish_bias * (1.0 - assist)
    }

    fn rlcf(&mut self, round: u32) -> Result<(), StageError> {
        if !self.policies.iter().any(|p| p.kind == NoteOrigin::FullyAI) {
            return Ok(());
        }
        let Some(model) = self.model.as_ref() else {
            return Ok(());
        };
        let bias = self.effective_polish_bias();
        let observations = observations_from_ratings(&self.ratings, &self.notes, bias);
        let seed = derive_seed(self.config.policy_update.seed, &[tag::KMEANS, u64::from(round)]);
        let rm: RewardModel = match train_reward_model(&observations, model, self.config.k_archetypes, seed, bias) {
            Ok(rm) => rm,
            Err(e) => {
                warn!("round {round}: reward model unavailable: {e}");
                return Ok(());
            }
        };
        let published: Vec<Vec<f64>> = self.helpful_notes().into_iter().map(|n| n.style).collect();
        let cfg = self.config.policy_update.clone();
        for i in 0..self.policies.len() {
            if self.policies[i].kind != NoteOrigin::FullyAI {
                continue;
            }
            let writer = self.policies[i].writer_id;
            let mut rng = substream(cfg.seed, &[tag::RLCF, u64::from(round), writer.0]);
            let mut step = Ok(self.policies[i].clone());
            for _ in 0..cfg.steps_per_update {
                step = step.and_then(|p| rlcf_update(&p, &rm, &published, &cfg, &mut rng));
            }
            match step {
                Ok(updated) => {
                    let (reward, intercept, novelty) = policy_reward(&updated, &rm, &published, &cfg)?;
                    self.trajectory.push(TrajectoryRow {
                        round,
                        writer_id: writer,
                        reward,
                        expected_intercept: intercept,
                        novelty,
                        theta: updated.theta(),
                    });
                    self.policies[i] = updated;
                }
                Err(RlcfError::InsufficientArchetypes { .. }) => {
                    warn!("round {round}: too few archetypes to update writer {writer}");
                }
                Err(e) => return Err(e.into()),
            }
        }
        self.reward_models.push(RewardSnapshot { round, model: rm });
        Ok(())
    }

    fn metrics(&self, round: u32, tally: &RoundTally) -> Result<MetricsRecord, StageError> {
        let mut status_counts = [0u64; 3];
        let mut published_by_origin = [0u64; 3];
        for (id, s) in &self.statuses {
            match s {
                NoteStatus::Helpful => {
                    status_counts[0] += 1;
                    published_by_origin[self.notes[id].origin.index()] += 1;
                }
                NoteStatus::NotHelpful => status_counts[1] += 1,
                NoteStatus::NeedsMoreRatings => status_counts[2] += 1,
            }
        }
        if status_counts.iter().sum::<u64>() != self.notes.len() as u64 {
            return Err(StageError::Invariant("statuses do not partition the notes"));
        }
        let published_total = status_counts[0];
        let human_published = published_by_origin[0] + published_by_origin[1];

        let mut ttp: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for id in &tally.newly_published {
            ttp[self.notes[id].origin.index()].push(f64::from(self.publish_delays[id]));
        }

        let covered = self.covered_posts();
        let coverage = if self.targeted.is_empty() {
            0.0
        } else {
            self.targeted.iter().filter(|p| self.is_covered(**p, &covered)).count() as f64
                / self.targeted.len() as f64
        };

        let published = self.helpful_notes();
        let scores: BTreeMap<NoteId, f64> = match &self.model {
            Some(m) => published
                .iter()
                .filter_map(|n| m.note_intercept(n.note_id).map(|i| (n.note_id, i)))
                .collect(),
            None => BTreeMap::new(),
        };
        let gap = hacking_gap(&published, &scores);
        let scored_gap = match &self.model {
            Some(m) => {
                let all_scores: BTreeMap<NoteId, f64> = m.notes.iter().map(|(id, e)| (*id, e.intercept)).collect();
                let scored: Vec<NoteVector> = all_scores.keys().map(|id| self.notes[id].clone()).collect();
                hacking_gap(&scored, &all_scores)
            }
            None => hacking_gap(&[], &BTreeMap::new()),
        };
        let styles: Vec<Vec<f64>> = published.iter().map(|n| n.style.clone()).collect();
        let intercepts: Vec<f64> = scores.values().copied().collect();

        Ok(MetricsRecord {
            round,
            notes_created_human: tally.created[0],
            notes_created_assisted: tally.created[1],
            notes_created_ai: tally.created[2],
            notes_created_total: tally.created.iter().sum(),
            notes_published_human: published_by_origin[0],
            notes_published_assisted: published_by_origin[1],
            notes_published_ai: published_by_origin[2],
            notes_published_total: published_total,
            status_helpful: status_counts[0],
            status_not_helpful: status_counts[1],
            status_needs_more: status_counts[2],
            human_share_published: if published_total == 0 {
                0.0
            } else {
                human_published as f64 / published_total as f64
            },
            ttp_human: mean(&ttp[0]),
            ttp_assisted: mean(&ttp[1]),
            ttp_ai: mean(&ttp[2]),
            coverage,
            overload: tally.overload,
            corr_accuracy: gap.corr_accuracy,
            corr_polish: gap.corr_polish,
            mean_published_accuracy: gap.mean_accuracy,
            corr_accuracy_scored: scored_gap.corr_accuracy,
            corr_polish_scored: scored_gap.corr_polish,
            homogenization_index: homogenization_index(&styles),
            mean_published_intercept: mean(&intercepts),
            reuse_count: tally.reuse,
            adapt_count: tally.adapt,
            match_retirements: tally.retirements,
            dedup_posts: tally.dedup_posts,
            pending_notes: tally.pending,
            ratings_this_round: tally.ratings,
            ratings_total: self.ratings.len() as u64,
            external_ingested: tally.ingested,
        })
    }
}

/// Runs a whole scenario. `external` holds replayed protocol submissions;
/// each is ingested in the first round its post exists.
pub fn run_scenario(config: &ScenarioConfig, external: &[ExternalSubmission]) -> Result<ScenarioOutput, HarnessError> {
    let mut eco = Ecosystem::new(config.clone(), external.to_vec())?;
    while !eco.is_done() {
        eco.step()?;
    }
    Ok(eco.finish())
}
