//! Scenario files.
//!
//! A scenario is a TOML document. Only `seed` and `num_pulses` are required;
//! everything else has a documented default. Unknown keys are errors.
//!
//! ```toml
//! schema_version = 1
//! name = "intercept_resend"
//! seed = 7
//! num_pulses = 100000
//!
//! [detectors.d0.curve]
//! peak = 1.0
//!
//! [strategy]
//! kind = "intercept_resend"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::attacks::StrategySpec;
use crate::calibration::CalibrationConfig;
use crate::detector::{DetectorParams, GateSchedule};
use crate::error::{check_non_negative, check_range, ValidationError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    /// Per-pulse loss probability.
    pub loss: f64,
    /// Fixed propagation delay, ns.
    pub delay: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            loss: 0.0,
            delay: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorsConfig {
    pub d0: DetectorParams,
    pub d1: DetectorParams,
}

impl DetectorsConfig {
    pub fn pair(&self) -> [DetectorParams; 2] {
        [self.d0, self.d1]
    }
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_threshold() -> f64 {
    0.11
}

fn default_sample_fraction() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    pub num_pulses: u64,
    #[serde(default = "default_threshold")]
    pub qber_threshold: f64,
    #[serde(default = "default_sample_fraction")]
    pub sample_fraction: f64,
    /// Resolution of the publicly revealed timestamps, ns. 0 = full precision.
    #[serde(default)]
    pub timestamp_resolution: f64,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub detectors: DetectorsConfig,
    #[serde(default)]
    pub schedule: GateSchedule,
    #[serde(default)]
    pub strategy: StrategySpec,
    /// When present, Bob calibrates his gates before the key session.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationConfig>,
}

impl SessionConfig {
    pub fn minimal(seed: u64, num_pulses: u64) -> Self {
        SessionConfig {
            schema_version: SCHEMA_VERSION,
            name: String::new(),
            seed,
            num_pulses,
            qber_threshold: default_threshold(),
            sample_fraction: default_sample_fraction(),
            timestamp_resolution: 0.0,
            channel: ChannelConfig::default(),
            detectors: DetectorsConfig::default(),
            schedule: GateSchedule::default(),
            strategy: StrategySpec::None,
            calibration: None,
        }
    }

    /// Every check except the pulse count.
    pub fn validate_parameters(&self) -> Result<(), ValidationError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ValidationError::new(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        check_range("qber_threshold", self.qber_threshold, 0.0, 1.0)?;
        check_range("sample_fraction", self.sample_fraction, 0.0, 1.0)?;
        if self.sample_fraction == 0.0 {
            return Err(ValidationError::new("sample_fraction", "must be > 0"));
        }
        check_non_negative("timestamp_resolution", self.timestamp_resolution)?;
        check_range("channel.loss", self.channel.loss, 0.0, 1.0)?;
        check_non_negative("channel.delay", self.channel.delay)?;
        self.detectors.d0.validate("detectors.d0")?;
        self.detectors.d1.validate("detectors.d1")?;
        self.schedule.validate("schedule")?;
        self.strategy.validate("strategy")?;
        if let Some(c) = &self.calibration {
            c.validate("calibration")?;
        }
        if matches!(self.strategy, StrategySpec::CalibrationSpoof(_)) && self.calibration.is_none()
        {
            return Err(ValidationError::new(
                "strategy.kind",
                "calibration_spoof needs a [calibration] block",
            ));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.num_pulses == 0 {
            return Err(ValidationError::new("num_pulses", "must be > 0"));
        }
        self.validate_parameters()
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Serialize(e.to_string()))
    }

    /// Canonical JSON (sorted keys), the input of the config hash.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config is serializable");
        serde_json::to_string(&value).expect("value is serializable")
    }

    /// Returns a copy with the numeric field at dotted `path` set to `value`,
    /// re-validated.
    pub fn with_path(&self, path: &str, value: f64) -> Result<SessionConfig, ConfigError> {
        let mut root = serde_json::to_value(self).expect("config is serializable");
        let mut node = &mut root;
        for part in path.split('.') {
            node = node
                .get_mut(part)
                .ok_or_else(|| ConfigError::UnknownPath(path.to_string()))?;
        }
        match node {
            Value::Number(n) if n.is_f64() => *node = Value::from(value),
            Value::Number(_) => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(ConfigError::Invalid(ValidationError::new(
                        path,
                        format!("expects a non-negative integer, got {value}"),
                    )));
                }
                *node = Value::from(value as u64);
            }
            _ => return Err(ConfigError::UnknownPath(path.to_string())),
        }
        let cfg: SessionConfig =
            serde_json::from_value(root).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(#[from] ValidationError),
    #[error("'{0}' does not name a numeric config field")]
    UnknownPath(String),
    #[error("cannot serialize config: {0}")]
    Serialize(String),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
}

pub fn parse_config(text: &str) -> Result<SessionConfig, ConfigError> {
    let cfg: SessionConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<SessionConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}
