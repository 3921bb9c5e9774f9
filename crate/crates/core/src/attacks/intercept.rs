use rand::{Rng, RngCore};

use super::{measure_ideal, EveAction, EveLog, EveLogEntry, EveStrategy, StrategyKind};
use crate::optics::{encode_bit, malus_transmission, Basis, Bit, Polarization};
use crate::protocol::OpticalPulse;

/// Measures Alice's photon in a random basis and resends the result in that
/// basis at the nominal time.
pub fn intercept_resend<R: Rng + ?Sized>(
    pulse: &OpticalPulse,
    rng: &mut R,
) -> (OpticalPulse, EveLogEntry) {
    let basis = Basis::from_bool(rng.random::<bool>());
    let bit = measure_ideal(pulse.polarization, basis, rng);
    let polarization = encode_bit(bit, basis);
    let out = OpticalPulse::single_photon(pulse.slot, pulse.emission_time, polarization);
    let entry = EveLogEntry {
        slot: pulse.slot,
        measured_basis: Some(basis),
        guessed_bit: bit,
        action: EveAction::Resend {
            polarization,
            arrival_time: 0.0,
            intensity: 1.0,
        },
    };
    (out, entry)
}

/// Measures with a fixed linear analyzer at `analyzer_angle` degrees and
/// resends the collapsed state. Transmission is read as bit 0.
pub fn breidbart_variant<R: Rng + ?Sized>(
    pulse: &OpticalPulse,
    analyzer_angle: f64,
    rng: &mut R,
) -> (OpticalPulse, EveLogEntry) {
    let p_pass = malus_transmission(pulse.polarization.degrees(), analyzer_angle);
    let passed = rng.random::<f64>() < p_pass;
    let (bit, polarization) = if passed {
        (Bit::Zero, Polarization::from_degrees(analyzer_angle))
    } else {
        (Bit::One, Polarization::from_degrees(analyzer_angle + 90.0))
    };
    let out = OpticalPulse::single_photon(pulse.slot, pulse.emission_time, polarization);
    let entry = EveLogEntry {
        slot: pulse.slot,
        measured_basis: None,
        guessed_bit: bit,
        action: EveAction::Resend {
            polarization,
            arrival_time: 0.0,
            intensity: 1.0,
        },
    };
    (out, entry)
}

/// Forwards everything untouched.
#[derive(Debug, Default)]
pub struct Passive {
    log: EveLog,
}

impl EveStrategy for Passive {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Passive
    }

    fn intercept(&mut self, pulse: OpticalPulse, _rng: &mut dyn RngCore) -> Vec<OpticalPulse> {
        vec![pulse]
    }

    fn log(&self) -> &EveLog {
        &self.log
    }

    fn take_log(&mut self) -> EveLog {
        std::mem::take(&mut self.log)
    }
}

#[derive(Debug, Default)]
pub struct InterceptResend {
    log: EveLog,
}

impl EveStrategy for InterceptResend {
    fn kind(&self) -> StrategyKind {
        StrategyKind::InterceptResend
    }

    fn intercept(&mut self, pulse: OpticalPulse, rng: &mut dyn RngCore) -> Vec<OpticalPulse> {
        let (out, entry) = intercept_resend(&pulse, rng);
        self.log.push(entry);
        vec![out]
    }

    fn log(&self) -> &EveLog {
        &self.log
    }

    fn take_log(&mut self) -> EveLog {
        std::mem::take(&mut self.log)
    }
}

#[derive(Debug)]
pub struct Breidbart {
    analyzer_angle: f64,
    log: EveLog,
}

impl Breidbart {
    pub fn new(analyzer_angle: f64) -> Self {
        Breidbart {
            analyzer_angle,
            log: EveLog::default(),
        }
    }
}

impl EveStrategy for Breidbart {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Breidbart
    }

    fn intercept(&mut self, pulse: OpticalPulse, rng: &mut dyn RngCore) -> Vec<OpticalPulse> {
        let (out, entry) = breidbart_variant(&pulse, self.analyzer_angle, rng);
        self.log.push(entry);
        vec![out]
    }

    fn log(&self) -> &EveLog {
        &self.log
    }

    fn take_log(&mut self) -> EveLog {
        std::mem::take(&mut self.log)
    }
}
