use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{
    measure_ideal, AttackError, EveAction, EveLog, EveLogEntry, EveStrategy, StrategyKind,
};
use crate::detector::{DetectorPair, DetectorParams, GateSchedule};
use crate::error::{check_non_negative, check_positive, check_range, ValidationError};
use crate::optics::{encode_bit, Basis, Bit};
use crate::protocol::OpticalPulse;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FakedStatesParams {
    /// Largest acceptable η_blind / η_live at the chosen arrival time.
    pub max_blind_ratio: f64,
    /// Only times where the live detector keeps at least this fraction of
    /// its peak efficiency are considered.
    pub min_live_fraction: f64,
    /// Refuse to run when no time meets `max_blind_ratio`. When false the
    /// best available time is used regardless.
    pub strict: bool,
    pub scan_step: f64,
}

impl Default for FakedStatesParams {
    fn default() -> Self {
        FakedStatesParams {
            max_blind_ratio: 0.05,
            min_live_fraction: 0.5,
            strict: true,
            scan_step: 0.001,
        }
    }
}

impl FakedStatesParams {
    pub fn validate(&self, prefix: &str) -> Result<(), ValidationError> {
        check_non_negative(&format!("{prefix}.max_blind_ratio"), self.max_blind_ratio)?;
        check_range(
            &format!("{prefix}.min_live_fraction"),
            self.min_live_fraction,
            0.0,
            1.0,
        )?;
        check_positive(&format!("{prefix}.scan_step"), self.scan_step)
    }
}

/// Arrival times Eve uses, indexed by the bit she wants Bob to see.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FakedStatesPlan {
    pub times: [f64; 2],
    pub live_efficiency: [f64; 2],
    pub blind_efficiency: [f64; 2],
}

impl FakedStatesPlan {
    pub fn blind_ratio(&self, bit: Bit) -> f64 {
        let i = bit.value() as usize;
        self.blind_efficiency[i] / self.live_efficiency[i]
    }
}

/// Scans Bob's efficiency curves for, per target bit `x`, the time where
/// detector `x` is live and detector `¬x` is as blind as possible.
///
/// Candidates must keep `η_x ≥ min_live_fraction · peak_x`. Among them the
/// lowest `η_¬x / η_x` wins; ties go to the larger `η_x`, then the earlier time.
pub fn plan_faked_states(
    params: &FakedStatesParams,
    detectors: &[DetectorParams; 2],
    schedule: &GateSchedule,
) -> Result<FakedStatesPlan, AttackError> {
    params.validate("strategy")?;
    let pair = DetectorPair::new(*detectors, *schedule);
    let (a0, b0) = pair.gate_window(0);
    let (a1, b1) = pair.gate_window(1);
    let (start, end) = (a0.min(a1), b0.max(b1));
    let steps = ((end - start) / params.scan_step).ceil() as usize;

    let mut plan = FakedStatesPlan {
        times: [0.0; 2],
        live_efficiency: [0.0; 2],
        blind_efficiency: [0.0; 2],
    };
    for live in 0..2 {
        let blind = 1 - live;
        let floor = params.min_live_fraction * detectors[live].curve.peak;
        let mut best: Option<(f64, f64, f64, f64)> = None; // (ratio, live, blind, t)
        for i in 0..=steps {
            let t = start + i as f64 * params.scan_step;
            let eta_live = pair.efficiency(live, t);
            if eta_live <= 0.0 || eta_live < floor {
                continue;
            }
            let eta_blind = pair.efficiency(blind, t);
            let ratio = eta_blind / eta_live;
            let better = match best {
                None => true,
                Some((r, l, _, _)) => {
                    ratio < r - 1e-12 || ((ratio - r).abs() <= 1e-12 && eta_live > l + 1e-15)
                }
            };
            if better {
                best = Some((ratio, eta_live, eta_blind, t));
            }
        }
        let bit = Bit::from_bool(live == 1);
        let Some((ratio, eta_live, eta_blind, t)) = best else {
            return Err(AttackError::NoBlindTime {
                bit,
                best_ratio: f64::INFINITY,
                max_ratio: params.max_blind_ratio,
            });
        };
        if params.strict && ratio > params.max_blind_ratio {
            return Err(AttackError::NoBlindTime {
                bit,
                best_ratio: ratio,
                max_ratio: params.max_blind_ratio,
            });
        }
        plan.times[live] = t;
        plan.live_efficiency[live] = eta_live;
        plan.blind_efficiency[live] = eta_blind;
    }
    Ok(plan)
}

/// One faked-states step: measure in a random basis `b` (bit `x`), resend
/// `¬x` in `¬b` at the time where only detector `x` can fire.
pub fn faked_state<R: Rng + ?Sized>(
    pulse: &OpticalPulse,
    plan: &FakedStatesPlan,
    rng: &mut R,
) -> (OpticalPulse, EveLogEntry) {
    let basis = Basis::from_bool(rng.random::<bool>());
    let bit = measure_ideal(pulse.polarization, basis, rng);
    let polarization = encode_bit(bit.flipped(), basis.other());
    let arrival_time = plan.times[bit.value() as usize];
    let out = OpticalPulse {
        arrival_time,
        ..OpticalPulse::single_photon(pulse.slot, pulse.emission_time, polarization)
    };
    let entry = EveLogEntry {
        slot: pulse.slot,
        measured_basis: Some(basis),
        guessed_bit: bit,
        action: EveAction::Resend {
            polarization,
            arrival_time,
            intensity: 1.0,
        },
    };
    (out, entry)
}

#[derive(Debug)]
pub struct FakedStates {
    params: FakedStatesParams,
    plan: FakedStatesPlan,
    log: EveLog,
}

impl FakedStates {
    pub fn new(
        params: FakedStatesParams,
        detectors: &[DetectorParams; 2],
        schedule: &GateSchedule,
    ) -> Result<Self, AttackError> {
        Ok(FakedStates {
            params,
            plan: plan_faked_states(&params, detectors, schedule)?,
            log: EveLog::default(),
        })
    }

    pub fn plan(&self) -> &FakedStatesPlan {
        &self.plan
    }
}

impl EveStrategy for FakedStates {
    fn kind(&self) -> StrategyKind {
        StrategyKind::FakedStatesDem
    }

    fn intercept(&mut self, pulse: OpticalPulse, rng: &mut dyn RngCore) -> Vec<OpticalPulse> {
        let (out, entry) = faked_state(&pulse, &self.plan, rng);
        self.log.push(entry);
        vec![out]
    }

    fn retune(
        &mut self,
        detectors: &[DetectorParams; 2],
        schedule: &GateSchedule,
    ) -> Result<(), AttackError> {
        self.plan = plan_faked_states(&self.params, detectors, schedule)?;
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

    fn schedule(d1: f64) -> GateSchedule {
        GateSchedule {
            gate_offset_d1: d1,
            ..GateSchedule::default()
        }
    }

    #[test]
    fn perfect_mismatch_uses_the_plateau() {
        let det = [DetectorParams::default(); 2];
        let plan = plan_faked_states(&FakedStatesParams::default(), &det, &schedule(2.5)).unwrap();
        assert_eq!(plan.blind_efficiency, [0.0, 0.0]);
        assert_eq!(plan.live_efficiency, [0.1, 0.1]);
        assert!((plan.times[0] + 0.5).abs() < 1e-9, "{:?}", plan.times);
        assert!((plan.times[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn sub_nanosecond_mismatch_still_finds_blind_edge() {
        let det = [DetectorParams::default(); 2];
        let plan = plan_faked_states(&FakedStatesParams::default(), &det, &schedule(0.4)).unwrap();
        assert_eq!(plan.blind_efficiency, [0.0, 0.0]);
        // D1 opens at −0.6 ns; D0 there sits at 80% of its rise
        let expected = 0.1 * (1.0 - (0.8 * std::f64::consts::PI).cos()) / 2.0;
        assert!((plan.live_efficiency[0] - expected).abs() < 1e-3);
        assert!((plan.times[0] + 0.6).abs() < 2e-3);
        assert!((plan.times[1] - 1.0).abs() < 2e-3);
    }

    #[test]
    fn aligned_detectors_refuse() {
        let det = [DetectorParams::default(); 2];
        let err =
            plan_faked_states(&FakedStatesParams::default(), &det, &schedule(0.0)).unwrap_err();
        match err {
            AttackError::NoBlindTime { best_ratio, .. } => {
                assert!((best_ratio - 1.0).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
        let lax = FakedStatesParams {
            strict: false,
            ..FakedStatesParams::default()
        };
        let plan = plan_faked_states(&lax, &det, &schedule(0.0)).unwrap();
        assert!((plan.blind_ratio(Bit::Zero) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn best_ratio_shrinks_with_mismatch() {
        let det = [DetectorParams::default(); 2];
        let lax = FakedStatesParams {
            strict: false,
            ..FakedStatesParams::default()
        };
        let ratios: Vec<f64> = (0..=10)
            .map(|i| {
                plan_faked_states(&lax, &det, &schedule(i as f64 * 0.1))
                    .unwrap()
                    .blind_ratio(Bit::Zero)
            })
            .collect();
        assert!(
            ratios.windows(2).all(|w| w[1] <= w[0] + 1e-12),
            "{ratios:?}"
        );
    }
}
