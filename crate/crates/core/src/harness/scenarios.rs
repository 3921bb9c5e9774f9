//! Built-in scenarios, embedded at compile time.

use std::path::Path;

use super::config::{load_config, parse_config, ConfigError, SessionConfig};

pub const BUILTIN: &[(&str, &str)] = &[
    (
        "no_eve_ideal",
        include_str!("../../scenarios/no_eve_ideal.toml"),
    ),
    (
        "no_eve_realistic",
        include_str!("../../scenarios/no_eve_realistic.toml"),
    ),
    (
        "intercept_resend",
        include_str!("../../scenarios/intercept_resend.toml"),
    ),
    ("breidbart", include_str!("../../scenarios/breidbart.toml")),
    (
        "faked_states_perfect_dem",
        include_str!("../../scenarios/faked_states_perfect_dem.toml"),
    ),
    (
        "faked_states_0p4ns",
        include_str!("../../scenarios/faked_states_0p4ns.toml"),
    ),
    (
        "time_shift",
        include_str!("../../scenarios/time_shift.toml"),
    ),
    (
        "after_gate",
        include_str!("../../scenarios/after_gate.toml"),
    ),
    (
        "calibration_spoof",
        include_str!("../../scenarios/calibration_spoof.toml"),
    ),
    (
        "sidechannel_0p5ns",
        include_str!("../../scenarios/sidechannel_0p5ns.toml"),
    ),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

pub fn builtin(name: &str) -> Result<SessionConfig, ConfigError> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ConfigError::UnknownScenario(name.to_string()))?;
    parse_config(text)
}

/// An existing file path wins over a built-in name. Files without a `name`
/// are named after their stem.
pub fn resolve(scenario: &str) -> Result<SessionConfig, ConfigError> {
    let path = Path::new(scenario);
    if path.is_file() {
        let mut cfg = load_config(path)?;
        if cfg.name.is_empty() {
            cfg.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        return Ok(cfg);
    }
    builtin(scenario)
}
