//! Scenario config files: strict JSON, validated after parsing.

use std::fs;
use std::path::{Path, PathBuf};

use bridgesim_core::harness::{ConfigError, ScenarioConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Syntax or type error. `field` is the dotted path of the offending
    /// key (empty when the error is not tied to one).
    #[error("{}line {line}, column {column}: {message}", field_prefix(.field))]
    Parse {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

fn field_prefix(field: &str) -> String {
    if field.is_empty() || field == "." {
        String::new()
    } else {
        format!("field `{field}` at ")
    }
}

impl ConfigFileError {
    /// The config field the error refers to, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigFileError::Parse { field, .. } if !field.is_empty() && field != "." => Some(field),
            ConfigFileError::Invalid(e) => Some(&e.field),
            _ => None,
        }
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigFileError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = (inner.line(), inner.column());
        let message = inner.to_string();
        let message = message
            .strip_suffix(&format!(" at line {line} column {column}"))
            .unwrap_or(&message)
            .to_string();
        ConfigFileError::Parse {
            field,
            line,
            column,
            message,
        }
    })?;
    config.validate()?;
    Ok(config)
}

/// Parses a config value already held as JSON (used by sweeps).
pub fn config_from_value(value: serde_json::Value) -> Result<ScenarioConfig, ConfigFileError> {
    let config: ScenarioConfig = serde_path_to_error::deserialize(value).map_err(|e| ConfigFileError::Parse {
        field: e.path().to_string(),
        line: 0,
        column: 0,
        message: e.into_inner().to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigFileError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn config_to_string(config: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}

pub fn save_config(path: &Path, config: &ScenarioConfig) -> std::io::Result<()> {
    fs::write(path, config_to_string(config) + "\n")
}
