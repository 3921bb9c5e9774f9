//! Eavesdropping strategies.
//!
//! Every strategy sits between the channel and Bob: it receives Alice's pulse
//! for a slot and forwards zero, one or several pulses. Strategies that
//! measure record their basis and bit guess in an [`EveLog`], which the
//! protocol engine scores against Alice's key.

mod after_gate;
mod calibration_spoof;
mod faked_states;
mod intercept;
mod time_shift;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{DetectorParams, GateSchedule};
use crate::error::ValidationError;
use crate::optics::{detection_probabilities, Basis, Bit, Polarization};
use crate::protocol::OpticalPulse;

pub use after_gate::{AfterGate, AfterGateParams};
pub use calibration_spoof::{calibration_spoof, CalibrationSpoof, CalibrationSpoofParams};
pub use faked_states::{plan_faked_states, FakedStates, FakedStatesParams, FakedStatesPlan};
pub use intercept::{breidbart_variant, intercept_resend, Breidbart, InterceptResend, Passive};
pub use time_shift::{binary_entropy, time_shift_information, TimeShift, TimeShiftParams};

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error(
        "no usable blind time for bit {bit}: best blind/live efficiency ratio {best_ratio:.4} exceeds {max_ratio:.4}"
    )]
    NoBlindTime {
        bit: Bit,
        best_ratio: f64,
        max_ratio: f64,
    },
    #[error("after-gate pulse power {power} outside [{threshold}, {}) for detector D{detector}", 2.0 * threshold)]
    PowerOutsideSandwich {
        power: f64,
        threshold: f64,
        detector: usize,
    },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Passive,
    InterceptResend,
    Breidbart,
    FakedStatesDem,
    TimeShift,
    AfterGate,
    CalibrationSpoof,
}

impl StrategyKind {
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::Passive => "passive",
            StrategyKind::InterceptResend => "intercept_resend",
            StrategyKind::Breidbart => "breidbart",
            StrategyKind::FakedStatesDem => "faked_states_dem",
            StrategyKind::TimeShift => "time_shift",
            StrategyKind::AfterGate => "after_gate",
            StrategyKind::CalibrationSpoof => "calibration_spoof",
        }
    }
}

/// What Eve put back on the line for a slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EveAction {
    Resend {
        polarization: Polarization,
        arrival_time: f64,
        intensity: f64,
    },
    Shift {
        arrival_time: f64,
    },
}

impl EveAction {
    pub fn label(&self) -> &'static str {
        match self {
            EveAction::Resend { intensity, .. } if *intensity > 1.0 => "bright_resend",
            EveAction::Resend { .. } => "resend",
            EveAction::Shift { .. } => "shift",
        }
    }

    pub fn forwarded(&self) -> (Option<Polarization>, f64, Option<f64>) {
        match *self {
            EveAction::Resend {
                polarization,
                arrival_time,
                intensity,
            } => (Some(polarization), arrival_time, Some(intensity)),
            EveAction::Shift { arrival_time } => (None, arrival_time, None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveLogEntry {
    pub slot: u64,
    /// `None` when Eve did not measure in Z or X (time shift, intermediate basis).
    pub measured_basis: Option<Basis>,
    pub guessed_bit: Bit,
    pub action: EveAction,
}

/// One entry per slot Eve touched, in slot order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EveLog {
    pub entries: Vec<EveLogEntry>,
}

impl EveLog {
    pub fn push(&mut self, entry: EveLogEntry) {
        debug_assert!(self.entries.last().is_none_or(|e| e.slot < entry.slot));
        self.entries.push(entry);
    }

    pub fn get(&self, slot: u64) -> Option<&EveLogEntry> {
        self.entries
            .binary_search_by_key(&slot, |e| e.slot)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The man-in-the-middle contract.
pub trait EveStrategy: Send {
    fn kind(&self) -> StrategyKind;

    /// Handles Alice's pulse for one slot and returns what reaches Bob.
    fn intercept(&mut self, pulse: OpticalPulse, rng: &mut dyn RngCore) -> Vec<OpticalPulse>;

    /// Hook on Bob's synchronization pulses. Pass-through unless overridden.
    fn intercept_calibration(&mut self, pulse: OpticalPulse) -> OpticalPulse {
        pulse
    }

    /// Called whenever Bob's gate schedule changes (after calibration). Eve
    /// controls the synchronization line, so she learns the new offsets.
    fn retune(
        &mut self,
        _detectors: &[DetectorParams; 2],
        _schedule: &GateSchedule,
    ) -> Result<(), AttackError> {
        Ok(())
    }

    fn log(&self) -> &EveLog;

    fn take_log(&mut self) -> EveLog;
}

/// Ideal projective measurement in `basis`.
pub fn measure_ideal<R: Rng + ?Sized>(pol: Polarization, basis: Basis, rng: &mut R) -> Bit {
    let (p0, _) = detection_probabilities(pol, basis);
    if p0 >= 1.0 {
        Bit::Zero
    } else if p0 <= 0.0 {
        Bit::One
    } else {
        Bit::from_bool(rng.random::<f64>() >= p0)
    }
}

/// Strategy selection as written in a scenario file (`[strategy] kind = ...`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategySpec {
    #[default]
    None,
    Passive,
    InterceptResend,
    Breidbart {
        #[serde(default = "default_analyzer")]
        analyzer_angle: f64,
    },
    FakedStatesDem(FakedStatesParams),
    TimeShift(TimeShiftParams),
    AfterGate(AfterGateParams),
    CalibrationSpoof(CalibrationSpoofParams),
}

fn default_analyzer() -> f64 {
    22.5
}

impl StrategySpec {
    pub fn kind(&self) -> Option<StrategyKind> {
        Some(match self {
            StrategySpec::None => return None,
            StrategySpec::Passive => StrategyKind::Passive,
            StrategySpec::InterceptResend => StrategyKind::InterceptResend,
            StrategySpec::Breidbart { .. } => StrategyKind::Breidbart,
            StrategySpec::FakedStatesDem(_) => StrategyKind::FakedStatesDem,
            StrategySpec::TimeShift(_) => StrategyKind::TimeShift,
            StrategySpec::AfterGate(_) => StrategyKind::AfterGate,
            StrategySpec::CalibrationSpoof(_) => StrategyKind::CalibrationSpoof,
        })
    }

    /// Parameter checks that do not depend on Bob's hardware.
    pub fn validate(&self, prefix: &str) -> Result<(), ValidationError> {
        match self {
            StrategySpec::Breidbart { analyzer_angle } => {
                crate::error::check_finite(&format!("{prefix}.analyzer_angle"), *analyzer_angle)
            }
            StrategySpec::FakedStatesDem(p) => p.validate(prefix),
            StrategySpec::TimeShift(p) => p.validate(prefix),
            StrategySpec::AfterGate(p) => p.validate(prefix),
            StrategySpec::CalibrationSpoof(p) => p.validate(prefix),
            StrategySpec::None | StrategySpec::Passive | StrategySpec::InterceptResend => Ok(()),
        }
    }

    /// Instantiates the strategy against Bob's (characterized) apparatus.
    pub fn build(
        &self,
        detectors: &[DetectorParams; 2],
        schedule: &GateSchedule,
    ) -> Result<Option<Box<dyn EveStrategy>>, AttackError> {
        self.validate("strategy")?;
        let strategy: Box<dyn EveStrategy> = match self {
            StrategySpec::None => return Ok(None),
            StrategySpec::Passive => Box::new(Passive::default()),
            StrategySpec::InterceptResend => Box::new(InterceptResend::default()),
            StrategySpec::Breidbart { analyzer_angle } => Box::new(Breidbart::new(*analyzer_angle)),
            StrategySpec::FakedStatesDem(p) => Box::new(FakedStates::new(*p, detectors, schedule)?),
            StrategySpec::TimeShift(p) => Box::new(TimeShift::new(*p)),
            StrategySpec::AfterGate(p) => Box::new(AfterGate::new(*p, detectors, schedule)?),
            StrategySpec::CalibrationSpoof(p) => {
                Box::new(CalibrationSpoof::new(*p, detectors, schedule)?)
            }
        };
        Ok(Some(strategy))
    }
}
