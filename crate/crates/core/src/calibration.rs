//! Bob's gate-synchronization routine.
//!
//! Alice sends bright H pulses, Bob measures them in X and scans each
//! detector's gate offset independently, keeping the offset with the most
//! clicks. A bright pulse is treated as a train of single photons spread
//! uniformly over its duration.
//!
//! Every scan step replays the same seeded photon train, and each photon
//! carries one uniform draw `u` shared by both detectors: it counts for
//! detector `k` at gate offset `τ` iff `u < route_k · η_k(t − τ)`. Counts are
//! therefore monotone in efficiency across steps and exactly equal wherever
//! the efficiencies agree, so argmax ties are real ties and resolve to the
//! earliest offset.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::EveStrategy;
use crate::detector::{DetectorPair, GateSchedule};
use crate::error::{check_finite, check_non_negative, check_positive, join_path, ValidationError};
use crate::optics::{detection_probabilities, Basis, Polarization};
use crate::protocol::OpticalPulse;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Photons per calibration pulse.
    pub pulse_intensity: f64,
    pub num_pulses_per_step: u32,
    pub scan_min: f64,
    pub scan_max: f64,
    pub scan_step: f64,
    /// Envelope width of a calibration pulse, ns.
    pub pulse_duration: f64,
    /// Slot-relative arrival of the calibration pulses.
    pub pulse_arrival: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            pulse_intensity: 1000.0,
            num_pulses_per_step: 1000,
            scan_min: -2.0,
            scan_max: 2.0,
            scan_step: 0.05,
            pulse_duration: 2.0,
            pulse_arrival: 0.0,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self, prefix: &str) -> Result<(), ValidationError> {
        check_non_negative(&join_path(prefix, "pulse_intensity"), self.pulse_intensity)?;
        check_positive(&join_path(prefix, "scan_step"), self.scan_step)?;
        check_finite(&join_path(prefix, "scan_min"), self.scan_min)?;
        check_finite(&join_path(prefix, "scan_max"), self.scan_max)?;
        check_non_negative(&join_path(prefix, "pulse_duration"), self.pulse_duration)?;
        check_finite(&join_path(prefix, "pulse_arrival"), self.pulse_arrival)?;
        if self.scan_max < self.scan_min {
            return Err(ValidationError::new(
                join_path(prefix, "scan_max"),
                "must be >= scan_min",
            ));
        }
        if !(self.scan_min..=self.scan_max).contains(&self.pulse_arrival) {
            return Err(ValidationError::new(
                join_path(prefix, "pulse_arrival"),
                format!(
                    "scan range [{}, {}] must cover the arrival time",
                    self.scan_min, self.scan_max
                ),
            ));
        }
        if self.num_pulses_per_step == 0 {
            return Err(ValidationError::new(
                join_path(prefix, "num_pulses_per_step"),
                "must be > 0",
            ));
        }
        Ok(())
    }

    pub fn offsets(&self) -> Vec<f64> {
        let n = ((self.scan_max - self.scan_min) / self.scan_step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| self.scan_min + i as f64 * self.scan_step)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanStep {
    pub offset: f64,
    pub counts: [u64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub offset_d0: f64,
    pub offset_d1: f64,
    pub scan_profile: Vec<ScanStep>,
}

impl CalibrationResult {
    pub fn offset(&self, k: usize) -> f64 {
        if k == 0 {
            self.offset_d0
        } else {
            self.offset_d1
        }
    }

    pub fn peak_counts(&self) -> [u64; 2] {
        let mut out = [0; 2];
        for (k, o) in out.iter_mut().enumerate() {
            *o = self
                .scan_profile
                .iter()
                .map(|s| s.counts[k])
                .max()
                .unwrap_or(0);
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("calibration failed: detector D{detector} registered no clicks across the scan")]
    NoClicks { detector: usize },
    #[error("calibration pulse rejected: {0}")]
    InvalidPulse(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Clone, Copy)]
struct Photon {
    time: f64,
    u: f64,
    route: [f64; 2],
}

/// Scans both detectors' gate offsets over `config`'s range. The scan moves
/// the gates, so `pair.schedule`'s current offsets are ignored.
pub fn run_calibration<R: Rng + ?Sized>(
    config: &CalibrationConfig,
    pair: &DetectorPair,
    mut strategy: Option<&mut dyn EveStrategy>,
    rng: &mut R,
) -> Result<CalibrationResult, CalibrationError> {
    config.validate("calibration")?;
    let photons_per_pulse = config.pulse_intensity.round() as u64;
    let peak = [pair.params[0].curve.peak, pair.params[1].curve.peak];
    let reach = peak[0].max(peak[1]);

    let mut train = Vec::new();
    for j in 0..config.num_pulses_per_step {
        let mut pulse = OpticalPulse {
            arrival_time: config.pulse_arrival,
            intensity: config.pulse_intensity,
            duration: config.pulse_duration,
            ..OpticalPulse::single_photon(u64::from(j), 0.0, Polarization::H)
        };
        if let Some(eve) = strategy.as_deref_mut() {
            pulse = eve.intercept_calibration(pulse);
        }
        pulse.validate().map_err(CalibrationError::InvalidPulse)?;
        for _ in 0..photons_per_pulse {
            let (time, pol) = pulse.photon_at(rng.random::<f64>());
            let u = rng.random::<f64>();
            if u >= reach {
                continue;
            }
            let (p0, p1) = detection_probabilities(pol, Basis::X);
            if u < p0 * peak[0] || u < p1 * peak[1] {
                train.push(Photon {
                    time,
                    u,
                    route: [p0, p1],
                });
            }
        }
    }

    let scan_profile: Vec<ScanStep> = config
        .offsets()
        .into_iter()
        .map(|offset| {
            let mut counts = [0u64; 2];
            for (k, c) in counts.iter_mut().enumerate() {
                let curve = &pair.params[k].curve;
                *c = train
                    .iter()
                    .filter(|p| p.u < p.route[k] * curve.efficiency_at(p.time - offset))
                    .count() as u64;
            }
            ScanStep { offset, counts }
        })
        .collect();

    let mut best = [0usize; 2];
    for k in 0..2 {
        for (i, step) in scan_profile.iter().enumerate() {
            if step.counts[k] > scan_profile[best[k]].counts[k] {
                best[k] = i;
            }
        }
        if scan_profile[best[k]].counts[k] == 0 {
            return Err(CalibrationError::NoClicks { detector: k });
        }
    }
    Ok(CalibrationResult {
        offset_d0: scan_profile[best[0]].offset,
        offset_d1: scan_profile[best[1]].offset,
        scan_profile,
    })
}

/// Installs the calibrated offsets.
pub fn apply_calibration(result: &CalibrationResult, schedule: &GateSchedule) -> GateSchedule {
    GateSchedule {
        gate_offset_d0: result.offset_d0,
        gate_offset_d1: result.offset_d1,
        ..*schedule
    }
}
