//! The BB84 session loop, sifting, error estimation and the scripted
//! magical-ball walkthrough.

mod pulse;
mod records;
mod session;
mod sifting;

pub mod mbp;

pub use pulse::{OpticalPulse, Segment};
pub use records::{AliceSlotRecord, BobSlotRecord, RunStats, SiftedEntry, SiftedKey};
pub use session::{run_session, SessionError, SessionOutput};
pub use sifting::{
    abort_decision, estimate_qber, eve_info_accounting, sift, QberError, QberEstimate,
};
