//! Runs scenarios and writes their artifacts to a directory.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use bridgesim_core::harness::{run_scenario, HarnessError, ScenarioConfig, ScenarioOutput};
use bridgesim_core::writers::ExternalSubmission;
use log::{info, warn};
use serde_json::Value;
use thiserror::Error;

use crate::config::{config_from_value, config_to_string, ConfigFileError};
use crate::documents::{model_to_json, reward_model_to_json, trajectory_to_json};
use crate::protocol::parse_stream;
use crate::tables::{write_metrics, write_population, write_ratings, write_trajectory, TableError};

pub const SEED_ENV: &str = "BRIDGESIM_SEED";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigFileError),
    #[error("sweep parameter `{key}`: {reason}")]
    Param { key: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Table {
        path: PathBuf,
        #[source]
        source: TableError,
    },
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl RunError {
    /// 2 for anything wrong with the inputs, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Param { .. } | RunError::Input { .. } => 2,
            RunError::Output { .. } | RunError::Table { .. } | RunError::Harness(_) => 3,
        }
    }
}

/// Parses `BRIDGESIM_SEED` if set.
pub fn seed_from_env() -> Result<Option<u64>, RunError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| RunError::Param {
            key: SEED_ENV.to_string(),
            reason: format!("not an unsigned integer: {v:?}"),
        }),
        Err(_) => Ok(None),
    }
}

/// Seed overrides, applied in order: the `--seed` flag, then the
/// environment variable. Either one resets every nested seed.
#[derive(Clone, Copy, Debug, Default)]
pub struct SeedOverrides {
    pub flag: Option<u64>,
    pub env: Option<u64>,
}

impl SeedOverrides {
    pub fn apply(&self, config: &mut ScenarioConfig) {
        for seed in [self.flag, self.env].into_iter().flatten() {
            config.set_all_seeds(seed);
        }
    }
}

/// Reads a protocol file. Malformed records are logged and dropped;
/// well-formed ones are returned in file order.
pub fn load_external(path: &Path) -> Result<Vec<ExternalSubmission>, RunError> {
    let bytes = fs::read(path).map_err(|source| RunError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for rec in parse_stream(&bytes) {
        match rec {
            Ok(s) => out.push(s),
            Err(e) => warn!("{}: {e}", path.display()),
        }
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path).map(BufWriter::new).map_err(|source| RunError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(|source| RunError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn table<F>(path: &Path, f: F) -> Result<(), RunError>
where
    F: FnOnce(BufWriter<File>) -> Result<(), TableError>,
{
    f(create(path)?).map_err(|source| RunError::Table {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs `config` and writes every artifact into `out`:
///
/// - `metrics.csv`, `ratings.csv`, `population.csv`
/// - `policy_trajectory.csv` and `policy_trajectory.json`
/// - `model.json` (last refit) and `models/model_round_NNNN.json` per refit
/// - `models/reward_round_NNNN.json` per reward-model fit
/// - `config.json`, the effective config
pub fn run_to_dir(
    config: &ScenarioConfig,
    external: &[ExternalSubmission],
    out: &Path,
) -> Result<ScenarioOutput, RunError> {
    let models = out.join("models");
    fs::create_dir_all(&models).map_err(|source| RunError::Output {
        path: models.clone(),
        source,
    })?;
    let output = run_scenario(config, external)?;

    table(&out.join("metrics.csv"), |w| write_metrics(w, &output.records))?;
    table(&out.join("ratings.csv"), |w| write_ratings(w, &output.ratings))?;
    table(&out.join("population.csv"), |w| write_population(w, &output.population))?;
    table(&out.join("policy_trajectory.csv"), |w| write_trajectory(w, &output.trajectory))?;
    write_text(&out.join("policy_trajectory.json"), &trajectory_to_json(&output.trajectory))?;
    for snap in &output.snapshots {
        let name = format!("model_round_{:04}.json", snap.round);
        write_text(&models.join(name), &model_to_json(&snap.model, Some(snap.round)))?;
    }
    if let Some(last) = output.snapshots.last() {
        write_text(&out.join("model.json"), &model_to_json(&last.model, Some(last.round)))?;
    }
    for snap in &output.reward_models {
        let name = format!("reward_round_{:04}.json", snap.round);
        write_text(&models.join(name), &reward_model_to_json(&snap.model, Some(snap.round)))?;
    }
    write_text(&out.join("config.json"), &(config_to_string(config) + "\n"))?;
    info!(
        "{} rounds, {} notes, {} ratings -> {}",
        output.records.len(),
        output.notes.len(),
        output.ratings.len(),
        out.display()
    );
    Ok(output)
}

/// Sets the value at a dotted path such as `fit.learning_rate` or
/// `writers[3].notes_per_round`. Every step of the path except the last
/// must already exist.
pub fn set_param(root: &mut Value, key: &str, value: Value) -> Result<(), RunError> {
    let bad = |reason: String| RunError::Param {
        key: key.to_string(),
        reason,
    };
    let mut steps = Vec::new();
    for part in key.split('.') {
        let (name, rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if name.is_empty() && rest.is_empty() {
            return Err(bad("empty path segment".into()));
        }
        if !name.is_empty() {
            steps.push(Step::Key(name.to_string()));
        }
        let mut rest = rest;
        while let Some(stripped) = rest.strip_prefix('[') {
            let end = stripped.find(']').ok_or_else(|| bad("unclosed `[`".into()))?;
            let idx = stripped[..end]
                .parse()
                .map_err(|_| bad(format!("bad index {:?}", &stripped[..end])))?;
            steps.push(Step::Index(idx));
            rest = &stripped[end + 1..];
        }
        if !rest.is_empty() {
            return Err(bad(format!("unexpected {rest:?}")));
        }
    }
    let (last, init) = steps.split_last().ok_or_else(|| bad("empty path".into()))?;
    let mut cur = root;
    for step in init {
        cur = match step {
            Step::Key(k) => cur.get_mut(k.as_str()),
            Step::Index(i) => cur.get_mut(*i),
        }
        .ok_or_else(|| bad(format!("no such entry {step}")))?;
    }
    match last {
        Step::Key(k) => {
            let obj = cur.as_object_mut().ok_or_else(|| bad("parent is not an object".into()))?;
            obj.insert(k.clone(), value);
        }
        Step::Index(i) => {
            let slot = cur.get_mut(*i).ok_or_else(|| bad(format!("no such entry [{i}]")))?;
            *slot = value;
        }
    }
    Ok(())
}

enum Step {
    Key(String),
    Index(usize),
}

impl std::fmt::Display for Step {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Step::Key(k) => write!(f, "`{k}`"),
            Step::Index(i) => write!(f, "[{i}]"),
        }
    }
}

/// A sweep value as typed on the command line: JSON if it parses, a bare
/// string otherwise.
pub fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Splits a `--values` list on commas that are not nested inside brackets.
pub fn split_values(list: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in list.chars() {
        match c {
            '[' | '{' => depth += 1,
            ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn dir_name(key: &str, raw: &str) -> String {
    let clean: String = format!("{key}={raw}")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._=-".contains(c) { c } else { '_' })
        .collect();
    clean
}

/// Runs one scenario per value of `key`, each into its own subdirectory of
/// `out`. All variants are validated before the first one runs.
pub fn sweep(
    base: &Value,
    key: &str,
    values: &[String],
    seeds: SeedOverrides,
    external: &[ExternalSubmission],
    out: &Path,
) -> Result<Vec<PathBuf>, RunError> {
    if values.is_empty() {
        return Err(RunError::Param {
            key: key.to_string(),
            reason: "no values given".into(),
        });
    }
    let mut variants = Vec::new();
    for raw in values {
        let mut doc = base.clone();
        set_param(&mut doc, key, parse_value(raw))?;
        let mut config = config_from_value(doc)?;
        seeds.apply(&mut config);
        variants.push((out.join(dir_name(key, raw)), config));
    }
    let mut dirs = Vec::new();
    for (dir, config) in variants {
        run_to_dir(&config, external, &dir)?;
        dirs.push(dir);
    }
    Ok(dirs)
}
