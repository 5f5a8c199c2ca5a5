//! Versioned JSON documents for fitted models, reward models and policy
//! trajectories.

use std::collections::BTreeMap;

use bridgesim_core::bridge::{BridgingModel, NoteEmbedding, RaterEmbedding};
use bridgesim_core::harness::TrajectoryRow;
use bridgesim_core::ids::{NoteId, NoteOrigin, RaterId};
use bridgesim_core::rlcf::RewardModel;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

pub const MODEL_FORMAT: &str = "bridgesim.model";
pub const REWARD_FORMAT: &str = "bridgesim.reward_model";
pub const TRAJECTORY_FORMAT: &str = "bridgesim.policy_trajectory";

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("expected a {expected} document, found {found:?}")]
    WrongFormat { expected: &'static str, found: String },
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("duplicate {kind} id {id}")]
    Duplicate { kind: &'static str, id: u64 },
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    #[serde(flatten)]
    body: T,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RaterRow {
    rater_id: RaterId,
    intercept: f64,
    factor: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoteRow {
    note_id: NoteId,
    intercept: f64,
    factor: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<NoteOrigin>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    round: Option<u32>,
    global_intercept: f64,
    factor_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin_offsets: Option<[f64; 3]>,
    raters: Vec<RaterRow>,
    notes: Vec<NoteRow>,
}

fn wrap<T: Serialize>(format: &str, body: T) -> String {
    serde_json::to_string_pretty(&Envelope {
        format: format.to_string(),
        version: FORMAT_VERSION,
        body,
    })
    .expect("documents serialize")
}

fn unwrap<T: for<'de> Deserialize<'de>>(expected: &'static str, text: &str) -> Result<T, DocumentError> {
    // Check the envelope first so a wrong document type is reported as such
    // rather than as a missing field.
    #[derive(Deserialize)]
    struct Head {
        format: String,
        version: u32,
    }
    let head: Head = serde_json::from_str(text)?;
    if head.format != expected {
        return Err(DocumentError::WrongFormat {
            expected,
            found: head.format,
        });
    }
    if head.version != FORMAT_VERSION {
        return Err(DocumentError::Version(head.version));
    }
    let env: Envelope<T> = serde_json::from_str(text)?;
    Ok(env.body)
}

/// Serializes a fitted model; `round` records when it was fitted.
pub fn model_to_json(model: &BridgingModel, round: Option<u32>) -> String {
    let body = ModelBody {
        round,
        global_intercept: model.global_intercept,
        factor_dim: model.factor_dim,
        origin_offsets: model.origin_offsets,
        raters: model
            .raters
            .iter()
            .map(|(id, e)| RaterRow {
                rater_id: *id,
                intercept: e.intercept,
                factor: e.factor.clone(),
            })
            .collect(),
        notes: model
            .notes
            .iter()
            .map(|(id, e)| NoteRow {
                note_id: *id,
                intercept: e.intercept,
                factor: e.factor.clone(),
                origin: e.origin,
            })
            .collect(),
    };
    wrap(MODEL_FORMAT, body)
}

pub fn model_from_json(text: &str) -> Result<(BridgingModel, Option<u32>), DocumentError> {
    let body: ModelBody = unwrap(MODEL_FORMAT, text)?;
    let mut raters = BTreeMap::new();
    for r in body.raters {
        let e = RaterEmbedding {
            intercept: r.intercept,
            factor: r.factor,
        };
        if raters.insert(r.rater_id, e).is_some() {
            return Err(DocumentError::Duplicate {
                kind: "rater",
                id: r.rater_id.0,
            });
        }
    }
    let mut notes = BTreeMap::new();
    for n in body.notes {
        let e = NoteEmbedding {
            intercept: n.intercept,
            factor: n.factor,
            origin: n.origin,
        };
        if notes.insert(n.note_id, e).is_some() {
            return Err(DocumentError::Duplicate {
                kind: "note",
                id: n.note_id.0,
            });
        }
    }
    let model = BridgingModel {
        global_intercept: body.global_intercept,
        factor_dim: body.factor_dim,
        raters,
        notes,
        origin_offsets: body.origin_offsets,
    };
    Ok((model, body.round))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    round: Option<u32>,
    model: RewardModel,
}

pub fn reward_model_to_json(model: &RewardModel, round: Option<u32>) -> String {
    wrap(
        REWARD_FORMAT,
        RewardBody {
            round,
            model: model.clone(),
        },
    )
}

pub fn reward_model_from_json(text: &str) -> Result<(RewardModel, Option<u32>), DocumentError> {
    let body: RewardBody = unwrap(REWARD_FORMAT, text)?;
    Ok((body.model, body.round))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryBody {
    rows: Vec<TrajectoryRow>,
}

pub fn trajectory_to_json(rows: &[TrajectoryRow]) -> String {
    wrap(TRAJECTORY_FORMAT, TrajectoryBody { rows: rows.to_vec() })
}

pub fn trajectory_from_json(text: &str) -> Result<Vec<TrajectoryRow>, DocumentError> {
    let body: TrajectoryBody = unwrap(TRAJECTORY_FORMAT, text)?;
    Ok(body.rows)
}
