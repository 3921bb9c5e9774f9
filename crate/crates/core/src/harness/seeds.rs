//! Deterministic random streams.
//!
//! Every random stream in the lab is a ChaCha20 generator keyed by
//! `SHA-256("qkdlab-stream-v1" ‖ master_seed as u64 LE ‖ trial as u64 LE ‖ label)`.
//! Streams never depend on execution order, so results are identical no
//! matter how many worker threads run the trials.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha20Rng;

const DOMAIN: &[u8] = b"qkdlab-stream-v1";

pub fn derive_seed(master: u64, trial: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(master.to_le_bytes());
    h.update(trial.to_le_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

pub fn stream(master: u64, trial: u64, label: &str) -> SimRng {
    SimRng::from_seed(derive_seed(master, trial, label))
}

/// The independent streams one key-distribution session draws from.
#[derive(Debug, Clone)]
pub struct SessionRngs {
    pub alice: SimRng,
    pub channel: SimRng,
    pub bob: SimRng,
    pub detector: SimRng,
    pub eve: SimRng,
    pub eve_guess: SimRng,
    pub sampling: SimRng,
    pub dem: SimRng,
    pub calibration: SimRng,
}

impl SessionRngs {
    pub fn derive(master: u64, trial: u64) -> Self {
        SessionRngs {
            alice: stream(master, trial, "alice"),
            channel: stream(master, trial, "channel"),
            bob: stream(master, trial, "bob"),
            detector: stream(master, trial, "detector"),
            eve: stream(master, trial, "eve"),
            eve_guess: stream(master, trial, "eve-guess"),
            sampling: stream(master, trial, "sampling"),
            dem: stream(master, trial, "dem"),
            calibration: stream(master, trial, "calibration"),
        }
    }
}
