use serde::{Deserialize, Serialize};

use crate::detector::ClickOutcome;
use crate::optics::{Basis, Bit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AliceSlotRecord {
    pub slot: u64,
    pub bit: Bit,
    pub basis: Basis,
    pub emission_time: f64,
}

/// Bob's view of a slot. `outcome.timestamp` is the full-precision stamp;
/// `revealed_timestamp` is what goes out on the public channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BobSlotRecord {
    pub slot: u64,
    pub basis: Basis,
    pub outcome: ClickOutcome,
    pub revealed_timestamp: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiftedEntry {
    pub slot: u64,
    pub alice_bit: Bit,
    pub bob_bit: Bit,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiftedKey {
    pub entries: Vec<SiftedEntry>,
}

impl SiftedKey {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn errors(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.alice_bit != e.bob_bit)
            .count()
    }

    pub fn slots(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.slot).collect()
    }

    pub fn bob_bits(&self) -> Vec<Bit> {
        self.entries.iter().map(|e| e.bob_bit).collect()
    }
}

/// Summary of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub pulses_sent: u64,
    /// Slots with at least one click (double clicks included).
    pub pulses_detected: u64,
    pub double_clicks: u64,
    pub sifted_bits: u64,
    pub sampled_bits: u64,
    pub sampled_errors: u64,
    pub final_key_bits: u64,
    /// sifted / detected.
    pub sift_fraction: f64,
    /// `None` when nothing could be sampled.
    pub qber: Option<f64>,
    pub qber_threshold: f64,
    pub abort: bool,
    /// Eve's guess accuracy over the final (post-sampling) key.
    pub eve_known_fraction: Option<f64>,
    /// Eve's guess accuracy over every sifted bit.
    pub eve_sifted_accuracy: Option<f64>,
    /// detected / sent.
    pub detection_rate: f64,
    /// Bits of detector information per revealed timestamp under the fitted
    /// timing model, when both detectors produced enough events.
    pub timing_info_bits: Option<f64>,
    pub gate_offset_d0: f64,
    pub gate_offset_d1: f64,
}
