//! Scenario configuration, seeding, orchestration and reporting.

pub mod config;
pub mod output;
pub mod runner;
pub mod scenarios;
pub mod seeds;

pub use config::{
    load_config, parse_config, ChannelConfig, ConfigError, DetectorsConfig, SessionConfig,
    SCHEMA_VERSION,
};
pub use runner::{
    aggregate, run_scenario, run_scenario_detailed, run_sweep, run_trial, Aggregate, HarnessError,
    Proportion, Provenance, Report, SweepPoint, SweepReport,
};
pub use scenarios::{builtin, builtin_names, resolve};
pub use seeds::{derive_seed, stream, SessionRngs, SimRng};
