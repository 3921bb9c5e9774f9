use serde::{Deserialize, Serialize};

use crate::optics::Polarization;

/// One time slice of a structured pulse: `fraction` of the pulse duration
/// carried at `polarization`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub fraction: f64,
    pub polarization: Polarization,
}

/// A light pulse travelling from Alice (or Eve) to Bob.
///
/// `arrival_time` is measured relative to the slot's nominal arrival, so an
/// undisturbed pulse arrives at `0.0`. `intensity` is the mean photon number:
/// values up to 1 are treated as single-photon pulses, anything above as a
/// bright classical pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalPulse {
    pub slot: u64,
    pub emission_time: f64,
    pub arrival_time: f64,
    pub intensity: f64,
    pub polarization: Polarization,
    /// Temporal width of the envelope; zero for an ideal point-like pulse.
    #[serde(default)]
    pub duration: f64,
    #[serde(default)]
    pub segments: Option<Vec<Segment>>,
}

impl OpticalPulse {
    pub fn single_photon(slot: u64, emission_time: f64, polarization: Polarization) -> Self {
        OpticalPulse {
            slot,
            emission_time,
            arrival_time: 0.0,
            intensity: 1.0,
            polarization,
            duration: 0.0,
            segments: None,
        }
    }

    pub fn is_bright(&self) -> bool {
        self.intensity > 1.0
    }

    /// Checks the pulse invariants: non-negative intensity and segment
    /// fractions summing to one.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.intensity >= 0.0) {
            return Err(format!(
                "pulse intensity must be >= 0, got {}",
                self.intensity
            ));
        }
        if !self.arrival_time.is_finite() {
            return Err("pulse arrival time must be finite".into());
        }
        if !(self.duration >= 0.0) {
            return Err(format!(
                "pulse duration must be >= 0, got {}",
                self.duration
            ));
        }
        if let Some(segments) = &self.segments {
            let total: f64 = segments.iter().map(|s| s.fraction).sum();
            if segments.iter().any(|s| !(s.fraction >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(format!(
                    "segment fractions must be >= 0 and sum to 1, got {total}"
                ));
            }
        }
        Ok(())
    }

    /// Maps a position `u ∈ [0, 1)` along the pulse envelope to the arrival
    /// time and polarization of a photon found there.
    pub fn photon_at(&self, u: f64) -> (f64, Polarization) {
        let start = self.arrival_time - self.duration / 2.0;
        let time = start + u * self.duration;
        let pol = match &self.segments {
            None => self.polarization,
            Some(segments) => {
                let mut acc = 0.0;
                let mut pol = segments
                    .last()
                    .map_or(self.polarization, |s| s.polarization);
                for s in segments {
                    acc += s.fraction;
                    if u < acc {
                        pol = s.polarization;
                        break;
                    }
                }
                pol
            }
        };
        (time, pol)
    }
}
