use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{EveAction, EveLog, EveLogEntry, EveStrategy, StrategyKind};
use crate::error::{check_range, ValidationError};
use crate::optics::Bit;
use crate::protocol::OpticalPulse;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeShiftParams {
    pub t_early: f64,
    pub t_late: f64,
    /// Bit Eve bets on when she advances the pulse; the late shift bets on
    /// the other one.
    #[serde(default = "default_early_bit")]
    pub early_bit: Bit,
    #[serde(default = "default_half")]
    pub early_probability: f64,
}

fn default_early_bit() -> Bit {
    Bit::Zero
}

fn default_half() -> f64 {
    0.5
}

impl TimeShiftParams {
    pub fn validate(&self, prefix: &str) -> Result<(), ValidationError> {
        if !(self.t_early.is_finite()
            && self.t_late.is_finite()
            && self.t_early < 0.0
            && 0.0 < self.t_late)
        {
            return Err(ValidationError::new(
                format!("{prefix}.t_early"),
                format!(
                    "need t_early < 0 < t_late, got {} / {}",
                    self.t_early, self.t_late
                ),
            ));
        }
        check_range(
            &format!("{prefix}.early_probability"),
            self.early_probability,
            0.0,
            1.0,
        )
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// Posterior `P(bit = 0 | click)` at a shifted time, given the two detector
/// efficiencies there, and Eve's information `1 − h(posterior)` in bits per
/// clicked bit. `None` when neither detector can fire.
pub fn time_shift_information(eta0: f64, eta1: f64) -> Option<(f64, f64)> {
    let total = eta0 + eta1;
    if total <= 0.0 {
        return None;
    }
    let posterior = eta0 / total;
    Some((posterior, 1.0 - binary_entropy(posterior)))
}

/// Forwards Alice's pulse unmeasured, advanced or delayed.
#[derive(Debug)]
pub struct TimeShift {
    params: TimeShiftParams,
    log: EveLog,
}

impl TimeShift {
    pub fn new(params: TimeShiftParams) -> Self {
        TimeShift {
            params,
            log: EveLog::default(),
        }
    }

    pub fn shift<R: Rng + ?Sized>(
        &self,
        pulse: &OpticalPulse,
        rng: &mut R,
    ) -> (OpticalPulse, EveLogEntry) {
        let early = rng.random_bool(self.params.early_probability);
        let (arrival_time, guess) = if early {
            (self.params.t_early, self.params.early_bit)
        } else {
            (self.params.t_late, self.params.early_bit.flipped())
        };
        let out = OpticalPulse {
            arrival_time,
            ..pulse.clone()
        };
        let entry = EveLogEntry {
            slot: pulse.slot,
            measured_basis: None,
            guessed_bit: guess,
            action: EveAction::Shift { arrival_time },
        };
        (out, entry)
    }
}

impl EveStrategy for TimeShift {
    fn kind(&self) -> StrategyKind {
        StrategyKind::TimeShift
    }

    fn intercept(&mut self, pulse: OpticalPulse, rng: &mut dyn RngCore) -> Vec<OpticalPulse> {
        let (out, entry) = self.shift(&pulse, rng);
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
