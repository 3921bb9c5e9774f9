//! Gated single-photon detector pair behind Bob's PBS.
//!
//! Each detector has a temporal efficiency window (raised-cosine edges and a
//! flat plateau), dead time, per-gate dark counts, a hard power threshold for
//! bright pulses, one-shot afterpulsing and Gaussian timestamp jitter. Times
//! inside a slot are measured from the slot's nominal arrival; absolute time
//! (used for dead time) is `slot * period + relative time`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{
    check_finite, check_non_negative, check_positive, check_range, join_path, ValidationError,
};
use crate::optics::{detection_probabilities, Basis};
use crate::protocol::OpticalPulse;

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("slot {slot}: invalid pulse: {reason}")]
    InvalidPulse { slot: u64, reason: String },
}

/// Detection efficiency as a function of time within a gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EfficiencyCurve {
    pub center: f64,
    pub rise: f64,
    pub plateau: f64,
    pub fall: f64,
    pub peak: f64,
}

impl Default for EfficiencyCurve {
    fn default() -> Self {
        EfficiencyCurve {
            center: 0.0,
            rise: 0.5,
            plateau: 1.0,
            fall: 0.5,
            peak: 0.10,
        }
    }
}

impl EfficiencyCurve {
    pub fn validate(&self, prefix: &str) -> Result<(), ValidationError> {
        check_finite(&join_path(prefix, "center"), self.center)?;
        check_positive(&join_path(prefix, "rise"), self.rise)?;
        check_positive(&join_path(prefix, "fall"), self.fall)?;
        check_non_negative(&join_path(prefix, "plateau"), self.plateau)?;
        let peak = join_path(prefix, "peak");
        check_range(&peak, self.peak, 0.0, 1.0)?;
        if self.peak == 0.0 {
            return Err(ValidationError::new(peak, "must be > 0"));
        }
        Ok(())
    }

    /// `[start, end]` outside of which the efficiency is zero.
    pub fn window(&self) -> (f64, f64) {
        (
            self.center - self.plateau / 2.0 - self.rise,
            self.center + self.plateau / 2.0 + self.fall,
        )
    }

    pub fn efficiency_at(&self, t: f64) -> f64 {
        let plateau_start = self.center - self.plateau / 2.0;
        let plateau_end = self.center + self.plateau / 2.0;
        if t < plateau_start {
            let x = (t - (plateau_start - self.rise)) / self.rise;
            if x <= 0.0 {
                0.0
            } else {
                self.peak * (1.0 - (PI * x).cos()) / 2.0
            }
        } else if t <= plateau_end {
            self.peak
        } else {
            let x = (t - plateau_end) / self.fall;
            if x >= 1.0 {
                0.0
            } else {
                self.peak * (1.0 + (PI * x).cos()) / 2.0
            }
        }
    }
}

/// Free-function form of [`EfficiencyCurve::efficiency_at`].
pub fn efficiency_at(curve: &EfficiencyCurve, t: f64) -> f64 {
    curve.efficiency_at(t)
}

/// Physical parameters of one detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorParams {
    pub curve: EfficiencyCurve,
    /// ns of photon-insensitivity after every click.
    pub dead_time: f64,
    /// Per-gate probability of a click with no light.
    pub dark_count_prob: f64,
    /// Photons at or above which a bright pulse always clicks, gate or not.
    pub bright_threshold: f64,
    /// Click probability at the gate following sub-threshold illumination.
    pub afterpulse_prob: f64,
    pub jitter_sigma: f64,
    /// Systematic timestamp bias.
    pub centroid_offset: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            curve: EfficiencyCurve::default(),
            dead_time: 1000.0,
            dark_count_prob: 1e-6,
            bright_threshold: 1000.0,
            afterpulse_prob: 0.0,
            jitter_sigma: 0.05,
            centroid_offset: 0.0,
        }
    }
}

impl DetectorParams {
    /// An ideal detector: unit efficiency, no dead time, noiseless.
    pub fn ideal() -> Self {
        DetectorParams {
            curve: EfficiencyCurve {
                peak: 1.0,
                ..EfficiencyCurve::default()
            },
            dead_time: 0.0,
            dark_count_prob: 0.0,
            afterpulse_prob: 0.0,
            jitter_sigma: 0.0,
            ..DetectorParams::default()
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<(), ValidationError> {
        self.curve.validate(&join_path(prefix, "curve"))?;
        check_non_negative(&join_path(prefix, "dead_time"), self.dead_time)?;
        check_range(
            &join_path(prefix, "dark_count_prob"),
            self.dark_count_prob,
            0.0,
            1.0,
        )?;
        let threshold = join_path(prefix, "bright_threshold");
        check_finite(&threshold, self.bright_threshold)?;
        if self.bright_threshold <= 1.0 {
            return Err(ValidationError::new(
                threshold,
                format!("must be > 1, got {}", self.bright_threshold),
            ));
        }
        check_range(
            &join_path(prefix, "afterpulse_prob"),
            self.afterpulse_prob,
            0.0,
            1.0,
        )?;
        check_non_negative(&join_path(prefix, "jitter_sigma"), self.jitter_sigma)?;
        check_finite(&join_path(prefix, "centroid_offset"), self.centroid_offset)?;
        Ok(())
    }
}

/// Per-slot gate timing. The two offsets are independent, which is exactly
/// the freedom that produces a detector efficiency mismatch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateSchedule {
    pub period: f64,
    pub gate_offset_d0: f64,
    pub gate_offset_d1: f64,
    /// When set, each session adds a uniform draw from this range to the D1
    /// offset (an unpredictable, drifting mismatch).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_dem: Option<[f64; 2]>,
}

impl Default for GateSchedule {
    fn default() -> Self {
        GateSchedule {
            period: 100.0,
            gate_offset_d0: 0.0,
            gate_offset_d1: 0.0,
            random_dem: None,
        }
    }
}

impl GateSchedule {
    pub fn validate(&self, prefix: &str) -> Result<(), ValidationError> {
        check_positive(&join_path(prefix, "period"), self.period)?;
        check_finite(&join_path(prefix, "gate_offset_d0"), self.gate_offset_d0)?;
        check_finite(&join_path(prefix, "gate_offset_d1"), self.gate_offset_d1)?;
        if let Some([lo, hi]) = self.random_dem {
            let path = join_path(prefix, "random_dem");
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(ValidationError::new(
                    path,
                    format!("must be an ordered finite range, got [{lo}, {hi}]"),
                ));
            }
        }
        Ok(())
    }

    pub fn offset(&self, detector: usize) -> f64 {
        if detector == 0 {
            self.gate_offset_d0
        } else {
            self.gate_offset_d1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClickKind {
    #[serde(rename = "none")]
    None,
    D0,
    D1,
    #[serde(rename = "both")]
    Both,
}

impl ClickKind {
    pub fn label(self) -> &'static str {
        match self {
            ClickKind::None => "none",
            ClickKind::D0 => "D0",
            ClickKind::D1 => "D1",
            ClickKind::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<ClickKind> {
        match s.trim() {
            "none" => Some(ClickKind::None),
            "D0" => Some(ClickKind::D0),
            "D1" => Some(ClickKind::D1),
            "both" => Some(ClickKind::Both),
            _ => None,
        }
    }

    /// Detector index for single clicks.
    pub fn detector(self) -> Option<usize> {
        match self {
            ClickKind::D0 => Some(0),
            ClickKind::D1 => Some(1),
            _ => None,
        }
    }
}

/// What Bob's pair registered during one slot. The timestamp is the stamped
/// (jittered, biased) time of the earliest click.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickOutcome {
    pub kind: ClickKind,
    pub timestamp: Option<f64>,
}

impl ClickOutcome {
    pub const NONE: ClickOutcome = ClickOutcome {
        kind: ClickKind::None,
        timestamp: None,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorState {
    pub dead_until: [f64; 2],
    pub afterpulse_armed: [bool; 2],
}

impl DetectorState {
    pub fn new() -> Self {
        DetectorState {
            dead_until: [f64::NEG_INFINITY; 2],
            afterpulse_armed: [false; 2],
        }
    }
}

impl Default for DetectorState {
    fn default() -> Self {
        DetectorState::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrightResponse {
    Click,
    /// Below threshold but illuminated: an afterpulse may follow at the next gate.
    Armed,
    Dark,
}

/// Bright-pulse response: a hard threshold, independent of gate and dead time.
pub fn detect_bright(params: &DetectorParams, power: f64) -> BrightResponse {
    if power >= params.bright_threshold {
        BrightResponse::Click
    } else if power > 0.0 {
        BrightResponse::Armed
    } else {
        BrightResponse::Dark
    }
}

/// `true_time + centroid_offset + N(0, jitter_sigma)`.
pub fn stamp_timestamp<R: Rng + ?Sized>(
    params: &DetectorParams,
    true_time: f64,
    rng: &mut R,
) -> f64 {
    let jitter = if params.jitter_sigma > 0.0 {
        Normal::new(0.0, params.jitter_sigma)
            .expect("validated sigma")
            .sample(rng)
    } else {
        0.0
    };
    true_time + params.centroid_offset + jitter
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Photon,
    Dark,
    Afterpulse,
    Bright,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    detector: usize,
    source: Source,
}

/// Bob's two detectors together with their gate schedule and mutable state.
#[derive(Debug, Clone)]
pub struct DetectorPair {
    pub params: [DetectorParams; 2],
    pub schedule: GateSchedule,
    pub state: DetectorState,
}

impl DetectorPair {
    pub fn new(params: [DetectorParams; 2], schedule: GateSchedule) -> Self {
        DetectorPair {
            params,
            schedule,
            state: DetectorState::new(),
        }
    }

    /// Efficiency of detector `k` for light at slot-relative time `t`.
    pub fn efficiency(&self, k: usize, t: f64) -> f64 {
        self.params[k]
            .curve
            .efficiency_at(t - self.schedule.offset(k))
    }

    /// Slot-relative window of detector `k`.
    pub fn gate_window(&self, k: usize) -> (f64, f64) {
        let (a, b) = self.params[k].curve.window();
        let off = self.schedule.offset(k);
        (a + off, b + off)
    }

    /// Runs one slot: pending afterpulses, dark counts, then every pulse that
    /// reaches Bob (zero, one or several), with dead time enforced on
    /// photon-induced clicks only.
    pub fn detect_slot<R: Rng + ?Sized>(
        &mut self,
        slot: u64,
        pulses: &[OpticalPulse],
        basis: Basis,
        rng: &mut R,
    ) -> Result<ClickOutcome, DetectorError> {
        let mut events: Vec<Event> = Vec::with_capacity(4);

        for k in 0..2 {
            let (start, end) = self.gate_window(k);
            if std::mem::take(&mut self.state.afterpulse_armed[k])
                && self.params[k].afterpulse_prob > 0.0
                && rng.random_bool(self.params[k].afterpulse_prob)
            {
                events.push(Event {
                    time: rng.random_range(start..=end),
                    detector: k,
                    source: Source::Afterpulse,
                });
            }
            if self.params[k].dark_count_prob > 0.0
                && rng.random_bool(self.params[k].dark_count_prob)
            {
                events.push(Event {
                    time: rng.random_range(start..=end),
                    detector: k,
                    source: Source::Dark,
                });
            }
        }

        for pulse in pulses {
            pulse
                .validate()
                .map_err(|reason| DetectorError::InvalidPulse { slot, reason })?;
            if pulse.is_bright() {
                let (p0, p1) = detection_probabilities(pulse.polarization, basis);
                for (k, route) in [p0, p1].into_iter().enumerate() {
                    match detect_bright(&self.params[k], pulse.intensity * route) {
                        BrightResponse::Click => events.push(Event {
                            time: pulse.arrival_time,
                            detector: k,
                            source: Source::Bright,
                        }),
                        BrightResponse::Armed => self.state.afterpulse_armed[k] = true,
                        BrightResponse::Dark => {}
                    }
                }
            } else {
                if pulse.intensity <= 0.0
                    || (pulse.intensity < 1.0 && !rng.random_bool(pulse.intensity))
                {
                    continue;
                }
                let (time, pol) = if pulse.duration > 0.0 {
                    pulse.photon_at(rng.random::<f64>())
                } else {
                    (pulse.arrival_time, pulse.polarization)
                };
                let (p0, _) = detection_probabilities(pol, basis);
                let k = if p0 >= 1.0 || (p0 > 0.0 && rng.random::<f64>() < p0) {
                    0
                } else {
                    1
                };
                let eta = self.efficiency(k, time);
                if eta > 0.0 && rng.random_bool(eta) {
                    events.push(Event {
                        time,
                        detector: k,
                        source: Source::Photon,
                    });
                }
            }
        }

        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        let origin = slot as f64 * self.schedule.period;
        let mut first: [Option<f64>; 2] = [None, None];
        for ev in events {
            let k = ev.detector;
            let abs = origin + ev.time;
            if ev.source == Source::Photon && abs < self.state.dead_until[k] {
                continue;
            }
            if first[k].is_none() {
                first[k] = Some(ev.time);
            }
            self.state.dead_until[k] = self.state.dead_until[k].max(abs + self.params[k].dead_time);
        }

        let outcome = match first {
            [None, None] => ClickOutcome::NONE,
            [Some(t), None] => ClickOutcome {
                kind: ClickKind::D0,
                timestamp: Some(stamp_timestamp(&self.params[0], t, rng)),
            },
            [None, Some(t)] => ClickOutcome {
                kind: ClickKind::D1,
                timestamp: Some(stamp_timestamp(&self.params[1], t, rng)),
            },
            [Some(t0), Some(t1)] => {
                let k = if t0 <= t1 { 0 } else { 1 };
                ClickOutcome {
                    kind: ClickKind::Both,
                    timestamp: Some(stamp_timestamp(&self.params[k], t0.min(t1), rng)),
                }
            }
        };
        Ok(outcome)
    }
}

/// Single-pulse form of [`DetectorPair::detect_slot`].
pub fn detect_pulse<R: Rng + ?Sized>(
    state: &mut DetectorState,
    params: &[DetectorParams; 2],
    schedule: &GateSchedule,
    pulse: &OpticalPulse,
    basis: Basis,
    rng: &mut R,
) -> Result<ClickOutcome, DetectorError> {
    let mut pair = DetectorPair {
        params: *params,
        schedule: *schedule,
        state: *state,
    };
    let outcome = pair.detect_slot(pulse.slot, std::slice::from_ref(pulse), basis, rng)?;
    *state = pair.state;
    Ok(outcome)
}
