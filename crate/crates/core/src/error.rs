use thiserror::Error;

/// A rejected configuration value, named by its dotted field path
/// (e.g. `detectors.d0.dead_time`).
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {reason}")]
pub struct ValidationError {
    pub path: String,
    pub reason: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, reason: impl Into<String>) -> Self {
        ValidationError {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub(crate) fn join_path(prefix: &str, field: &str) -> String {
    if prefix.is_empty() {
        field.to_string()
    } else {
        format!("{prefix}.{field}")
    }
}

/// Checks `lo <= value <= hi` (and finiteness) for the field at `path`.
pub(crate) fn check_range(path: &str, value: f64, lo: f64, hi: f64) -> Result<(), ValidationError> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(ValidationError::new(
            path,
            format!("must be within [{lo}, {hi}], got {value}"),
        ))
    }
}

pub(crate) fn check_finite(path: &str, value: f64) -> Result<(), ValidationError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ValidationError::new(
            path,
            format!("must be finite, got {value}"),
        ))
    }
}

pub(crate) fn check_positive(path: &str, value: f64) -> Result<(), ValidationError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ValidationError::new(
            path,
            format!("must be > 0, got {value}"),
        ))
    }
}

pub(crate) fn check_non_negative(path: &str, value: f64) -> Result<(), ValidationError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ValidationError::new(
            path,
            format!("must be >= 0, got {value}"),
        ))
    }
}
