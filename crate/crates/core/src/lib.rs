//! A seeded BB84 laboratory: polarization optics, gated single-photon
//! detectors with their real-world flaws, the key-distribution protocol,
//! a family of eavesdropping attacks that exploit those flaws, Bob's gate
//! calibration, and the timing side channel in his public announcements.
//!
//! Everything random draws from named ChaCha20 streams derived from one
//! master seed (see [`harness::seeds`]), so any result can be reproduced
//! from its scenario file and seed.

pub mod attacks;
pub mod calibration;
pub mod detector;
pub mod error;
pub mod harness;
pub mod optics;
pub mod protocol;
pub mod sidechannel;

pub use harness::{run_scenario, run_sweep, Report, SessionConfig};
