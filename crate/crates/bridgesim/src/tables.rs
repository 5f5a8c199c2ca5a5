//! CSV tables: metrics, ratings, populations and policy trajectories.

use std::io::{Read, Write};

use bridgesim_core::bridge::{CritiqueDimension, CritiqueDirection, CritiqueToken, Rating, RatingLevel, RatingTag, TagSet};
use bridgesim_core::harness::{MetricsRecord, TrajectoryRow};
use bridgesim_core::ids::{NoteId, RaterId};
use bridgesim_core::population::RaterProfile;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("row {row}: bad {column}: {value:?}")]
    Value {
        row: usize,
        column: &'static str,
        value: String,
    },
    #[error("unexpected header {found:?}")]
    Header { found: Vec<String> },
}

const LIST_SEP: char = ';';

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(&LIST_SEP.to_string())
}

fn split_f64(s: &str, row: usize, column: &'static str) -> Result<Vec<f64>, TableError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(LIST_SEP)
        .map(|x| {
            x.trim().parse().map_err(|_| TableError::Value {
                row,
                column,
                value: s.to_string(),
            })
        })
        .collect()
}

/// Header-first metrics table. Absent values are empty cells.
pub fn write_metrics<W: Write>(out: W, records: &[MetricsRecord]) -> Result<(), TableError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(MetricsRecord::COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricsRecord>, TableError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != MetricsRecord::COLUMNS {
        return Err(TableError::Header { found: header });
    }
    r.deserialize().map(|row| row.map_err(TableError::from)).collect()
}

pub const RATING_COLUMNS: [&str; 6] = ["rater_id", "note_id", "level", "tags", "round", "critique"];

const CRITIQUES: [(&str, CritiqueDimension, CritiqueDirection); 6] = [
    ("accuracy_too_low", CritiqueDimension::Accuracy, CritiqueDirection::TooLow),
    ("accuracy_too_high", CritiqueDimension::Accuracy, CritiqueDirection::TooHigh),
    ("slant_too_low", CritiqueDimension::Slant, CritiqueDirection::TooLow),
    ("slant_too_high", CritiqueDimension::Slant, CritiqueDirection::TooHigh),
    ("polish_too_low", CritiqueDimension::Polish, CritiqueDirection::TooLow),
    ("polish_too_high", CritiqueDimension::Polish, CritiqueDirection::TooHigh),
];

fn critique_str(c: &CritiqueToken) -> &'static str {
    CRITIQUES
        .iter()
        .find(|(_, d, r)| *d == c.dimension && *r == c.direction)
        .map(|(s, ..)| *s)
        .expect("every critique has a name")
}

fn parse_critique(s: &str) -> Option<CritiqueToken> {
    CRITIQUES
        .iter()
        .find(|(name, ..)| *name == s)
        .map(|(_, dimension, direction)| CritiqueToken {
            dimension: *dimension,
            direction: *direction,
        })
}

pub fn write_ratings<W: Write>(out: W, ratings: &[Rating]) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATING_COLUMNS)?;
    for r in ratings {
        let tags: Vec<&str> = r.tags.iter().map(|t| t.as_str()).collect();
        w.write_record([
            r.rater_id.0.to_string(),
            r.note_id.0.to_string(),
            r.level.as_str().to_string(),
            tags.join(&LIST_SEP.to_string()),
            r.round.to_string(),
            r.critique.as_ref().map_or("", critique_str).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a ratings table; an empty critique cell means no critique.
pub fn read_ratings<R: Read>(input: R) -> Result<Vec<Rating>, TableError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != RATING_COLUMNS {
        return Err(TableError::Header { found: header });
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |column: &'static str, value: &str| TableError::Value {
            row,
            column,
            value: value.to_string(),
        };
        let int = |i: usize, column: &'static str| rec[i].trim().parse::<u64>().map_err(|_| bad(column, &rec[i]));
        let level = RatingLevel::parse(rec[2].trim()).ok_or_else(|| bad("level", &rec[2]))?;
        let mut tags = TagSet::new();
        for t in rec[3].split(LIST_SEP).map(str::trim).filter(|t| !t.is_empty()) {
            tags.insert(RatingTag::parse(t).ok_or_else(|| bad("tags", &rec[3]))?);
        }
        let round = u32::try_from(int(4, "round")?).map_err(|_| bad("round", &rec[4]))?;
        let mut rating = Rating::new(RaterId(int(0, "rater_id")?), NoteId(int(1, "note_id")?), level, round);
        rating.tags = tags;
        let critique = rec[5].trim();
        if !critique.is_empty() {
            rating.critique = Some(parse_critique(critique).ok_or_else(|| bad("critique", &rec[5]))?);
        }
        out.push(rating);
    }
    Ok(out)
}

pub const POPULATION_COLUMNS: [&str; 9] = [
    "rater_id",
    "viewpoint",
    "leniency",
    "accuracy_weight",
    "polish_weight",
    "alignment_weight",
    "noise_sd",
    "capacity_per_round",
    "assist_quality",
];

pub fn write_population<W: Write>(out: W, raters: &[RaterProfile]) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POPULATION_COLUMNS)?;
    for r in raters {
        w.write_record([
            r.rater_id.0.to_string(),
            join_f64(&r.viewpoint),
            r.leniency.to_string(),
            r.accuracy_weight.to_string(),
            r.polish_weight.to_string(),
            r.alignment_weight.to_string(),
            r.noise_sd.to_string(),
            r.capacity_per_round.to_string(),
            r.assist_quality.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_population<R: Read>(input: R) -> Result<Vec<RaterProfile>, TableError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != POPULATION_COLUMNS {
        return Err(TableError::Header { found: header });
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let real = |i: usize| {
            rec[i].trim().parse::<f64>().map_err(|_| TableError::Value {
                row,
                column: POPULATION_COLUMNS[i],
                value: rec[i].to_string(),
            })
        };
        let int = |i: usize| {
            rec[i].trim().parse::<u64>().map_err(|_| TableError::Value {
                row,
                column: POPULATION_COLUMNS[i],
                value: rec[i].to_string(),
            })
        };
        out.push(RaterProfile {
            rater_id: RaterId(int(0)?),
            viewpoint: split_f64(&rec[1], row, "viewpoint")?,
            leniency: real(2)?,
            accuracy_weight: real(3)?,
            polish_weight: real(4)?,
            alignment_weight: real(5)?,
            noise_sd: real(6)?,
            capacity_per_round: u32::try_from(int(7)?).map_err(|_| TableError::Value {
                row,
                column: "capacity_per_round",
                value: rec[7].to_string(),
            })?,
            assist_quality: real(8)?,
        });
    }
    Ok(out)
}

/// One row per policy update: `round, writer_id, reward,
/// expected_intercept, novelty, theta_0..theta_{n-1}`.
pub fn write_trajectory<W: Write>(out: W, rows: &[TrajectoryRow]) -> Result<(), TableError> {
    let width = rows.iter().map(|r| r.theta.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["round", "writer_id", "reward", "expected_intercept", "novelty"]
        .map(String::from)
        .to_vec();
    header.extend((0..width).map(|i| format!("theta_{i}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.round.to_string(),
            r.writer_id.0.to_string(),
            r.reward.to_string(),
            r.expected_intercept.to_string(),
            r.novelty.to_string(),
        ];
        rec.extend(r.theta.iter().map(|t| t.to_string()));
        rec.resize(header.len(), String::new());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
