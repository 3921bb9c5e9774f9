use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::config::{ConfigError, SessionConfig};
use super::seeds::SessionRngs;
use crate::attacks::{AttackError, EveStrategy};
use crate::protocol::{run_session, RunStats, SessionError, SessionOutput};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trial {trial}: {source}")]
    Session { trial: u64, source: SessionError },
    #[error("attack aborted: {0}")]
    Attack(#[from] AttackError),
    #[error("trials must be >= 1")]
    NoTrials,
    #[error("sweep needs at least one value")]
    EmptySweep,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

/// A binomial proportion pooled over sessions, with a 4σ band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub successes: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Option<Proportion> {
        if trials == 0 {
            return None;
        }
        let p = successes as f64 / trials as f64;
        let half = 4.0 * (p * (1.0 - p) / trials as f64).sqrt();
        Some(Proportion {
            value: p,
            lo: (p - half).max(0.0),
            hi: (p + half).min(1.0),
            successes,
            trials,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub sessions: u64,
    pub aborted: u64,
    /// Mean of per-session QBERs over sessions where it is defined.
    pub mean_qber: Option<f64>,
    /// All sampled bits pooled.
    pub qber: Option<Proportion>,
    pub detection_rate: Option<Proportion>,
    pub mean_sift_fraction: f64,
    pub mean_eve_known_fraction: Option<f64>,
    pub mean_eve_sifted_accuracy: Option<f64>,
    pub mean_timing_info_bits: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0u64), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Folds session stats in the order given. Only sums and counts are used,
/// so the result depends on the set of sessions, not on how they ran.
pub fn aggregate(stats: &[RunStats]) -> Aggregate {
    let sampled: u64 = stats.iter().map(|s| s.sampled_bits).sum();
    let errors: u64 = stats.iter().map(|s| s.sampled_errors).sum();
    let sent: u64 = stats.iter().map(|s| s.pulses_sent).sum();
    let detected: u64 = stats.iter().map(|s| s.pulses_detected).sum();
    Aggregate {
        sessions: stats.len() as u64,
        aborted: stats.iter().filter(|s| s.abort).count() as u64,
        mean_qber: mean(stats.iter().filter_map(|s| s.qber)),
        qber: Proportion::new(errors, sampled),
        detection_rate: Proportion::new(detected, sent),
        mean_sift_fraction: mean(stats.iter().map(|s| s.sift_fraction)).unwrap_or(0.0),
        mean_eve_known_fraction: mean(stats.iter().filter_map(|s| s.eve_known_fraction)),
        mean_eve_sifted_accuracy: mean(stats.iter().filter_map(|s| s.eve_sifted_accuracy)),
        mean_timing_info_bits: mean(stats.iter().filter_map(|s| s.timing_info_bits)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical JSON form of the config, hex.
    pub config_hash: String,
    pub seed: u64,
    pub trials: u64,
    pub version: String,
}

impl Provenance {
    pub fn of(config: &SessionConfig, trials: u64) -> Provenance {
        Provenance {
            config_hash: hex::encode(Sha256::digest(config.canonical_json().as_bytes())),
            seed: config.seed,
            trials,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub provenance: Provenance,
    pub sessions: Vec<RunStats>,
    pub aggregate: Aggregate,
}

impl Report {
    pub fn any_abort(&self) -> bool {
        self.aggregate.aborted > 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable") + "\n"
    }
}

/// Runs one trial with its own derived streams.
pub fn run_trial(config: &SessionConfig, trial: u64) -> Result<SessionOutput, HarnessError> {
    let detectors = config.detectors.pair();
    let mut strategy = config.strategy.build(&detectors, &config.schedule)?;
    let mut rngs = SessionRngs::derive(config.seed, trial);
    run_session(
        config,
        strategy.as_mut().map(|s| &mut **s as &mut dyn EveStrategy),
        &mut rngs,
    )
    .map_err(|source| HarnessError::Session { trial, source })
}

/// Runs `trials` sessions on the rayon pool. Returns the report and the
/// full output of trial 0 (for event logs).
pub fn run_scenario_detailed(
    config: &SessionConfig,
    trials: u64,
) -> Result<(Report, SessionOutput), HarnessError> {
    if trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    config.validate().map_err(ConfigError::from)?;
    config
        .strategy
        .build(&config.detectors.pair(), &config.schedule)?;
    let first = run_trial(config, 0)?;
    let rest: Vec<RunStats> = (1..trials)
        .into_par_iter()
        .map(|t| run_trial(config, t).map(|o| o.stats))
        .collect::<Result<_, _>>()?;
    let mut sessions = Vec::with_capacity(trials as usize);
    sessions.push(first.stats.clone());
    sessions.extend(rest);
    let report = Report {
        scenario: config.name.clone(),
        provenance: Provenance::of(config, trials),
        aggregate: aggregate(&sessions),
        sessions,
    };
    Ok((report, first))
}

pub fn run_scenario(config: &SessionConfig, trials: u64) -> Result<Report, HarnessError> {
    run_scenario_detailed(config, trials).map(|(r, _)| r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub scenario: String,
    pub param: String,
    pub provenance: Provenance,
    pub points: Vec<SweepPoint>,
}

pub fn run_sweep(
    config: &SessionConfig,
    param: &str,
    values: &[f64],
    trials: u64,
) -> Result<SweepReport, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::EmptySweep);
    }
    let configs: Vec<SessionConfig> = values
        .iter()
        .map(|&v| config.with_path(param, v))
        .collect::<Result<_, _>>()?;
    let points = configs
        .par_iter()
        .zip(values)
        .map(|(cfg, &value)| {
            run_scenario(cfg, trials).map(|r| SweepPoint {
                value,
                aggregate: r.aggregate,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepReport {
        scenario: config.name.clone(),
        param: param.to_string(),
        provenance: Provenance::of(config, trials),
        points,
    })
}
