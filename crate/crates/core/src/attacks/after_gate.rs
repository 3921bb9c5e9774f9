use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{
    measure_ideal, AttackError, EveAction, EveLog, EveLogEntry, EveStrategy, StrategyKind,
};
use crate::detector::{DetectorPair, DetectorParams, GateSchedule};
use crate::error::{check_non_negative, check_positive, ValidationError};
use crate::optics::{encode_bit, Basis};
use crate::protocol::OpticalPulse;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AfterGateParams {
    /// Photons per bright pulse. Must satisfy `threshold <= power < 2 * threshold`
    /// for both of Bob's detectors.
    pub pulse_power: f64,
    /// ns after the later of the two gates closes.
    #[serde(default = "default_offset")]
    pub pulse_time_offset: f64,
}

fn default_offset() -> f64 {
    2.0
}

impl AfterGateParams {
    pub fn validate(&self, prefix: &str) -> Result<(), ValidationError> {
        check_positive(&format!("{prefix}.pulse_power"), self.pulse_power)?;
        check_non_negative(
            &format!("{prefix}.pulse_time_offset"),
            self.pulse_time_offset,
        )
    }
}

/// Measures Alice's photon, then fires a bright pulse carrying the result
/// just after Bob's gates close, where only the power threshold matters.
#[derive(Debug)]
pub struct AfterGate {
    params: AfterGateParams,
    arrival_time: f64,
    log: EveLog,
}

impl AfterGate {
    pub fn new(
        params: AfterGateParams,
        detectors: &[DetectorParams; 2],
        schedule: &GateSchedule,
    ) -> Result<Self, AttackError> {
        params.validate("strategy")?;
        for (k, d) in detectors.iter().enumerate() {
            let threshold = d.bright_threshold;
            if !(params.pulse_power >= threshold && params.pulse_power < 2.0 * threshold) {
                return Err(AttackError::PowerOutsideSandwich {
                    power: params.pulse_power,
                    threshold,
                    detector: k,
                });
            }
        }
        Ok(AfterGate {
            params,
            arrival_time: Self::firing_time(&params, detectors, schedule),
            log: EveLog::default(),
        })
    }

    fn firing_time(
        params: &AfterGateParams,
        detectors: &[DetectorParams; 2],
        schedule: &GateSchedule,
    ) -> f64 {
        let pair = DetectorPair::new(*detectors, *schedule);
        pair.gate_window(0).1.max(pair.gate_window(1).1) + params.pulse_time_offset
    }

    pub fn arrival_time(&self) -> f64 {
        self.arrival_time
    }

    pub fn forge<R: Rng + ?Sized>(
        &self,
        pulse: &OpticalPulse,
        rng: &mut R,
    ) -> (OpticalPulse, EveLogEntry) {
        let basis = Basis::from_bool(rng.random::<bool>());
        let bit = measure_ideal(pulse.polarization, basis, rng);
        let polarization = encode_bit(bit, basis);
        let out = OpticalPulse {
            arrival_time: self.arrival_time,
            intensity: self.params.pulse_power,
            ..OpticalPulse::single_photon(pulse.slot, pulse.emission_time, polarization)
        };
        let entry = EveLogEntry {
            slot: pulse.slot,
            measured_basis: Some(basis),
            guessed_bit: bit,
            action: EveAction::Resend {
                polarization,
                arrival_time: self.arrival_time,
                intensity: self.params.pulse_power,
            },
        };
        (out, entry)
    }
}

impl EveStrategy for AfterGate {
    fn kind(&self) -> StrategyKind {
        StrategyKind::AfterGate
    }

    fn intercept(&mut self, pulse: OpticalPulse, rng: &mut dyn RngCore) -> Vec<OpticalPulse> {
        let (out, entry) = self.forge(&pulse, rng);
        self.log.push(entry);
        vec![out]
    }

    fn retune(
        &mut self,
        detectors: &[DetectorParams; 2],
        schedule: &GateSchedule,
    ) -> Result<(), AttackError> {
        self.arrival_time = Self::firing_time(&self.params, detectors, schedule);
        Ok(())
    }

    fn log(&self) -> &EveLog {
        &self.log
    }

    fn take_log(&mut self) -> EveLog {
        std::mem::take(&mut self.log)
    }
}
