use rand::Rng;
use rand_distr::{Distribution, Uniform};
use thiserror::Error;

use super::records::{AliceSlotRecord, BobSlotRecord, RunStats, SiftedKey};
use super::sifting::{abort_decision, estimate_qber, eve_info_accounting, sift};
use super::OpticalPulse;
use crate::attacks::{AttackError, EveLog, EveStrategy};
use crate::calibration::{apply_calibration, run_calibration, CalibrationError, CalibrationResult};
use crate::detector::{ClickKind, DetectorError, DetectorPair, GateSchedule};
use crate::error::ValidationError;
use crate::harness::seeds::SessionRngs;
use crate::harness::SessionConfig;
use crate::optics::{encode_bit, Basis, Bit};
use crate::sidechannel::{round_to, session_timing_information};

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("invalid config: {0}")]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error("attack aborted: {0}")]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub stats: RunStats,
    pub alice: Vec<AliceSlotRecord>,
    pub bob: Vec<BobSlotRecord>,
    pub sifted: SiftedKey,
    pub final_key: SiftedKey,
    pub eve_log: EveLog,
    /// Gate schedule the key exchange actually ran with.
    pub schedule: GateSchedule,
    pub calibration: Option<CalibrationResult>,
}

/// One key-distribution session.
///
/// Order of events: optional calibration (the strategy sees Bob's sync
/// pulses and then learns the resulting schedule), optional random mismatch
/// draw, then per slot: Alice picks bit and basis, the channel may lose the
/// pulse, Eve (if any) replaces it with zero or more pulses, Bob picks a
/// basis and his detectors respond. Afterwards: sifting, QBER sampling, the
/// abort decision, Eve's score and the timing leakage estimate.
pub fn run_session(
    config: &SessionConfig,
    mut strategy: Option<&mut dyn EveStrategy>,
    rngs: &mut SessionRngs,
) -> Result<SessionOutput, SessionError> {
    config.validate_parameters()?;
    let detectors = config.detectors.pair();
    let mut schedule = config.schedule;

    let calibration = match &config.calibration {
        Some(cal) => {
            let pair = DetectorPair::new(detectors, schedule);
            let result = run_calibration(
                cal,
                &pair,
                strategy.as_mut().map(|s| &mut **s as &mut dyn EveStrategy),
                &mut rngs.calibration,
            )?;
            schedule = apply_calibration(&result, &schedule);
            if let Some(eve) = strategy.as_mut().map(|s| &mut **s as &mut dyn EveStrategy) {
                eve.retune(&detectors, &schedule)?;
            }
            Some(result)
        }
        None => None,
    };
    if let Some([lo, hi]) = schedule.random_dem {
        let shift = if hi > lo {
            Uniform::new_inclusive(lo, hi)
                .expect("ordered range")
                .sample(&mut rngs.dem)
        } else {
            lo
        };
        schedule.gate_offset_d1 += shift;
    }

    let mut pair = DetectorPair::new(detectors, schedule);
    let n = config.num_pulses as usize;
    let mut alice = Vec::with_capacity(n);
    let mut bob = Vec::with_capacity(n);
    let mut detected = 0u64;
    let mut doubles = 0u64;

    for slot in 0..config.num_pulses {
        let bit = Bit::from_bool(rngs.alice.random::<bool>());
        let basis = Basis::from_bool(rngs.alice.random::<bool>());
        let emission_time = slot as f64 * schedule.period;
        alice.push(AliceSlotRecord {
            slot,
            bit,
            basis,
            emission_time,
        });

        let pulse = OpticalPulse::single_photon(slot, emission_time, encode_bit(bit, basis));
        let lost = config.channel.loss > 0.0 && rngs.channel.random_bool(config.channel.loss);
        let pulses = match (
            lost,
            strategy.as_mut().map(|s| &mut **s as &mut dyn EveStrategy),
        ) {
            (true, _) => Vec::new(),
            (false, Some(eve)) => eve.intercept(pulse, &mut rngs.eve),
            (false, None) => vec![pulse],
        };

        let bob_basis = Basis::from_bool(rngs.bob.random::<bool>());
        let outcome = pair.detect_slot(slot, &pulses, bob_basis, &mut rngs.detector)?;
        if outcome.kind != ClickKind::None {
            detected += 1;
        }
        if outcome.kind == ClickKind::Both {
            doubles += 1;
        }
        let revealed_timestamp = outcome
            .timestamp
            .map(|t| round_to(t, config.timestamp_resolution));
        bob.push(BobSlotRecord {
            slot,
            basis: bob_basis,
            outcome,
            revealed_timestamp,
        });
    }

    let sifted = sift(&alice, &bob);
    let (qber, sampled, errors, final_key) =
        match estimate_qber(&sifted, config.sample_fraction, &mut rngs.sampling) {
            Ok(est) => (
                Some(est.qber),
                est.sampled as u64,
                est.errors as u64,
                est.remaining,
            ),
            Err(_) => (None, 0, 0, SiftedKey::default()),
        };
    let abort = qber.is_none_or(|q| abort_decision(q, config.qber_threshold));
    let eve_log = strategy
        .as_mut()
        .map(|s| &mut **s as &mut dyn EveStrategy)
        .map(|s| s.take_log())
        .unwrap_or_default();
    let eve_sifted_accuracy = eve_info_accounting(&sifted, &eve_log, &mut rngs.eve_guess.clone());
    let eve_known_fraction = eve_info_accounting(&final_key, &eve_log, &mut rngs.eve_guess);

    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let stats = RunStats {
        pulses_sent: config.num_pulses,
        pulses_detected: detected,
        double_clicks: doubles,
        sifted_bits: sifted.len() as u64,
        sampled_bits: sampled,
        sampled_errors: errors,
        final_key_bits: final_key.len() as u64,
        sift_fraction: ratio(sifted.len() as u64, detected),
        qber,
        qber_threshold: config.qber_threshold,
        abort,
        eve_known_fraction,
        eve_sifted_accuracy,
        detection_rate: ratio(detected, config.num_pulses),
        timing_info_bits: session_timing_information(&bob, config.timestamp_resolution),
        gate_offset_d0: schedule.gate_offset_d0,
        gate_offset_d1: schedule.gate_offset_d1,
    };
    Ok(SessionOutput {
        stats,
        alice,
        bob,
        sifted,
        final_key,
        eve_log,
        schedule,
        calibration,
    })
}
