//! Polarization encoding and the waveplate + polarizing-beam-splitter
//! measurement used by Bob (and by Eve's ideal copy of Bob's apparatus).
//!
//! Only linear polarization is modeled. Angles are in degrees and always
//! normalized to `[0, 180)`. A half-wave plate with its optic axis at `θ`
//! maps an input angle `φ` to `φ − 2θ`; the PBS then transmits to D0 with
//! probability `cos²(φ')` and reflects to D1 with `sin²(φ')`.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A classical key bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub fn new(value: u8) -> Option<Bit> {
        match value {
            0 => Some(Bit::Zero),
            1 => Some(Bit::One),
            _ => None,
        }
    }

    pub fn from_bool(one: bool) -> Bit {
        if one {
            Bit::One
        } else {
            Bit::Zero
        }
    }

    pub fn value(self) -> u8 {
        match self {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }

    pub fn flipped(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }
}

impl From<Bit> for u8 {
    fn from(bit: Bit) -> u8 {
        bit.value()
    }
}

impl TryFrom<u8> for Bit {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Bit::new(value).ok_or_else(|| format!("bit must be 0 or 1, got {value}"))
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Preparation / measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// Rectilinear (H/V).
    Z,
    /// Diagonal (D/A).
    X,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Z, Basis::X];

    /// Half-wave-plate angle Bob applies to measure in this basis.
    pub fn waveplate_angle(self) -> f64 {
        match self {
            Basis::Z => 0.0,
            Basis::X => 22.5,
        }
    }

    pub fn other(self) -> Basis {
        match self {
            Basis::Z => Basis::X,
            Basis::X => Basis::Z,
        }
    }

    pub fn from_bool(diagonal: bool) -> Basis {
        if diagonal {
            Basis::X
        } else {
            Basis::Z
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Basis::Z => "Z",
            Basis::X => "X",
        }
    }

    pub fn parse(s: &str) -> Option<Basis> {
        match s.trim() {
            "Z" | "z" => Some(Basis::Z),
            "X" | "x" => Some(Basis::X),
            _ => None,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Linear polarization angle in degrees, normalized to `[0, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polarization(f64);

impl Polarization {
    pub const H: Polarization = Polarization(0.0);
    pub const D: Polarization = Polarization(45.0);
    pub const V: Polarization = Polarization(90.0);
    pub const A: Polarization = Polarization(135.0);

    pub fn from_degrees(angle: f64) -> Polarization {
        Polarization(normalize_degrees(angle))
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    /// Short name for the four protocol states, `None` otherwise.
    pub fn name(self) -> Option<&'static str> {
        match self.0 {
            0.0 => Some("H"),
            45.0 => Some("D"),
            90.0 => Some("V"),
            135.0 => Some("A"),
            _ => None,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            Some(name) => f.write_str(name),
            None => write!(f, "{:.4}deg", self.0),
        }
    }
}

fn normalize_degrees(angle: f64) -> f64 {
    let a = angle.rem_euclid(180.0);
    // rem_euclid can return exactly 180.0 for tiny negative inputs
    if a >= 180.0 {
        0.0
    } else {
        a
    }
}

/// BB84 state preparation: (0,Z)→H, (1,Z)→V, (0,X)→D, (1,X)→A.
pub fn encode_bit(bit: Bit, basis: Basis) -> Polarization {
    match (bit, basis) {
        (Bit::Zero, Basis::Z) => Polarization::H,
        (Bit::One, Basis::Z) => Polarization::V,
        (Bit::Zero, Basis::X) => Polarization::D,
        (Bit::One, Basis::X) => Polarization::A,
    }
}

/// Half-wave plate with its optic axis at `theta` degrees.
pub fn waveplate_rotate(pol: Polarization, theta: f64) -> Polarization {
    Polarization::from_degrees(pol.0 - 2.0 * theta)
}

/// Probability that a photon of polarization `angle` (degrees) is transmitted
/// by a PBS whose transmission axis sits at `analyzer` degrees.
pub fn malus_transmission(angle: f64, analyzer: f64) -> f64 {
    let c = (angle - analyzer).to_radians().cos();
    c * c
}

/// Routing probabilities `(D0, D1)` for a photon measured in `basis`.
///
/// The four protocol states land on exact 0/½/1 values so that a basis
/// match routes deterministically.
pub fn detection_probabilities(pol: Polarization, basis: Basis) -> (f64, f64) {
    let rotated = waveplate_rotate(pol, basis.waveplate_angle()).degrees();
    let p0 = match rotated {
        0.0 => 1.0,
        90.0 => 0.0,
        a if a == 45.0 || a == 135.0 => 0.5,
        a => malus_transmission(a, 0.0),
    };
    (p0, 1.0 - p0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn jones_half_wave(theta_deg: f64, input_deg: f64) -> f64 {
        // Jones matrix of a HWP at θ: [[cos2θ, sin2θ], [sin2θ, −cos2θ]]
        let t = (2.0 * theta_deg).to_radians();
        let (ex, ey) = (input_deg.to_radians().cos(), input_deg.to_radians().sin());
        let ox = t.cos() * ex + t.sin() * ey;
        let oy = t.sin() * ex - t.cos() * ey;
        oy.atan2(ox).to_degrees().rem_euclid(180.0)
    }

    #[test]
    fn encodes_the_four_states() {
        assert_eq!(encode_bit(Bit::Zero, Basis::Z).degrees(), 0.0);
        assert_eq!(encode_bit(Bit::Zero, Basis::X).degrees(), 45.0);
        assert_eq!(encode_bit(Bit::One, Basis::Z).degrees(), 90.0);
        assert_eq!(encode_bit(Bit::One, Basis::X).degrees(), 135.0);
    }

    #[test]
    fn waveplate_examples() {
        assert_eq!(waveplate_rotate(Polarization::D, 22.5), Polarization::H);
        assert_eq!(
            waveplate_rotate(Polarization::from_degrees(33.0), 0.0).degrees(),
            33.0
        );
        // Jones-calculus oracle: a HWP is a reflection about its axis, which
        // equals the −2θ convention up to the mod-180 sign of the angle.
        let jones = jones_half_wave(22.5, 135.0);
        let ours = waveplate_rotate(Polarization::A, 22.5).degrees();
        assert!((jones - ours).abs() < 1e-9 || (jones + ours - 180.0).abs() < 1e-9);
        assert_eq!(ours, 90.0);
    }

    #[test]
    fn detection_examples() {
        assert_eq!(
            detection_probabilities(Polarization::H, Basis::Z),
            (1.0, 0.0)
        );
        assert_eq!(
            detection_probabilities(Polarization::D, Basis::Z),
            (0.5, 0.5)
        );
        let (p0, p1) = detection_probabilities(Polarization::from_degrees(30.0), Basis::Z);
        assert!((p0 - 0.75).abs() < 1e-12);
        assert!((p1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn basis_match_is_deterministic() {
        for basis in Basis::ALL {
            assert_eq!(
                detection_probabilities(encode_bit(Bit::Zero, basis), basis),
                (1.0, 0.0)
            );
            assert_eq!(
                detection_probabilities(encode_bit(Bit::One, basis), basis),
                (0.0, 1.0)
            );
            for bit in [Bit::Zero, Bit::One] {
                let (p0, p1) = detection_probabilities(encode_bit(bit, basis), basis.other());
                assert!((p0 - 0.5).abs() < 1e-12 && (p1 - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn negative_zero_normalizes() {
        assert_eq!(Polarization::from_degrees(-1e-18).degrees(), 0.0);
        assert_eq!(Polarization::from_degrees(-45.0), Polarization::A);
    }

    proptest! {
        #[test]
        fn routing_is_normalized(angle in -720.0f64..720.0, diag in any::<bool>()) {
            let (p0, p1) = detection_probabilities(Polarization::from_degrees(angle), Basis::from_bool(diag));
            prop_assert!((p0 + p1 - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&p0));
        }

        #[test]
        fn rotation_inverts(angle in 0.0f64..180.0, theta in -360.0f64..360.0) {
            let p = Polarization::from_degrees(angle);
            let back = waveplate_rotate(waveplate_rotate(p, theta), -theta).degrees();
            let diff = (back - angle).rem_euclid(180.0);
            prop_assert!(diff < 1e-9 || 180.0 - diff < 1e-9);
        }
    }
}
