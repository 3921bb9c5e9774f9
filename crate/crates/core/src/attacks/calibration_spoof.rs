use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::faked_states::faked_state;
use super::{
    plan_faked_states, AttackError, EveLog, EveStrategy, FakedStatesParams, FakedStatesPlan,
    StrategyKind,
};
use crate::detector::{DetectorParams, GateSchedule};
use crate::error::{check_non_negative, ValidationError};
use crate::optics::Polarization;
use crate::protocol::{OpticalPulse, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpoofParams {
    /// Lead of the D-polarized half over the A-polarized half, ns.
    pub delta: f64,
    /// Faked-states settings used once the mismatch is installed.
    #[serde(default)]
    pub faked_states: FakedStatesParams,
}

impl CalibrationSpoofParams {
    pub fn validate(&self, prefix: &str) -> Result<(), ValidationError> {
        check_non_negative(&format!("{prefix}.delta"), self.delta)?;
        self.faked_states
            .validate(&format!("{prefix}.faked_states"))
    }
}

/// Reshapes a bright calibration pulse into a D-polarized first half and an
/// A-polarized second half whose centroids are `delta` apart. Anything that
/// is not bright passes through unchanged.
pub fn calibration_spoof(pulse: OpticalPulse, delta: f64) -> OpticalPulse {
    if !pulse.is_bright() {
        return pulse;
    }
    OpticalPulse {
        duration: 2.0 * delta,
        segments: Some(vec![
            Segment {
                fraction: 0.5,
                polarization: Polarization::D,
            },
            Segment {
                fraction: 0.5,
                polarization: Polarization::A,
            },
        ]),
        ..pulse
    }
}

/// Spoofs Bob's calibration, then runs faked states against the mismatch
/// his own routine installed.
#[derive(Debug)]
pub struct CalibrationSpoof {
    params: CalibrationSpoofParams,
    plan: Option<FakedStatesPlan>,
    log: EveLog,
}

impl CalibrationSpoof {
    /// Plans against `schedule` when a blind time already exists; otherwise
    /// the plan is made in [`EveStrategy::retune`] after calibration.
    pub fn new(
        params: CalibrationSpoofParams,
        detectors: &[DetectorParams; 2],
        schedule: &GateSchedule,
    ) -> Result<Self, AttackError> {
        params.validate("strategy")?;
        let plan = plan_faked_states(&params.faked_states, detectors, schedule).ok();
        Ok(CalibrationSpoof {
            params,
            plan,
            log: EveLog::default(),
        })
    }

    pub fn plan(&self) -> Option<&FakedStatesPlan> {
        self.plan.as_ref()
    }
}

impl EveStrategy for CalibrationSpoof {
    fn kind(&self) -> StrategyKind {
        StrategyKind::CalibrationSpoof
    }

    /// Without a plan (no mismatch installed yet) Eve stays passive.
    fn intercept(&mut self, pulse: OpticalPulse, rng: &mut dyn RngCore) -> Vec<OpticalPulse> {
        match &self.plan {
            Some(plan) => {
                let (out, entry) = faked_state(&pulse, plan, rng);
                self.log.push(entry);
                vec![out]
            }
            None => vec![pulse],
        }
    }

    fn intercept_calibration(&mut self, pulse: OpticalPulse) -> OpticalPulse {
        calibration_spoof(pulse, self.params.delta)
    }

    fn retune(
        &mut self,
        detectors: &[DetectorParams; 2],
        schedule: &GateSchedule,
    ) -> Result<(), AttackError> {
        self.plan = Some(plan_faked_states(
            &self.params.faked_states,
            detectors,
            schedule,
        )?);
        Ok(())
    }

    fn log(&self) -> &EveLog {
        &self.log
    }

    fn take_log(&mut self) -> EveLog {
        std::mem::take(&mut self.log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bright() -> OpticalPulse {
        OpticalPulse {
            intensity: 1000.0,
            duration: 2.0,
            ..OpticalPulse::single_photon(0, 0.0, Polarization::H)
        }
    }

    #[test]
    fn halves_are_delta_apart() {
        let p = calibration_spoof(bright(), 0.4);
        p.validate().unwrap();
        let (t_d, pol_d) = p.photon_at(0.25);
        let (t_a, pol_a) = p.photon_at(0.75);
        assert_eq!((pol_d, pol_a), (Polarization::D, Polarization::A));
        assert!((t_a - t_d - 0.4).abs() < 1e-12);
    }

    #[test]
    fn single_photons_untouched() {
        let p = OpticalPulse::single_photon(4, 0.0, Polarization::V);
        assert_eq!(calibration_spoof(p.clone(), 0.4), p);
    }

    #[test]
    fn zero_delta_collapses_to_a_point() {
        let p = calibration_spoof(bright(), 0.0);
        assert_eq!(p.photon_at(0.1).0, 0.0);
        assert_eq!(p.photon_at(0.9).0, 0.0);
    }
}
