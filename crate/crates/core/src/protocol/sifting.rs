use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use super::records::{AliceSlotRecord, BobSlotRecord, SiftedEntry, SiftedKey};
use crate::attacks::EveLog;
use crate::optics::Bit;

#[derive(Debug, Error, PartialEq)]
pub enum QberError {
    #[error("sifted key is empty; QBER is undefined")]
    EmptyKey,
    #[error("sample fraction must be in (0, 1], got {0}")]
    BadFraction(f64),
}

/// Keeps slots where the bases agree and exactly one detector clicked.
/// Records are matched by slot index; Bob records without an Alice
/// counterpart are ignored.
pub fn sift(alice: &[AliceSlotRecord], bob: &[BobSlotRecord]) -> SiftedKey {
    let mut entries = Vec::new();
    let mut ai = 0;
    for b in bob {
        while ai < alice.len() && alice[ai].slot < b.slot {
            ai += 1;
        }
        let Some(a) = alice.get(ai).filter(|a| a.slot == b.slot) else {
            continue;
        };
        if a.basis != b.basis {
            continue;
        }
        let bob_bit = match b.outcome.kind.detector() {
            Some(0) => Bit::Zero,
            Some(_) => Bit::One,
            None => continue,
        };
        entries.push(SiftedEntry {
            slot: b.slot,
            alice_bit: a.bit,
            bob_bit,
        });
    }
    SiftedKey { entries }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QberEstimate {
    pub qber: f64,
    pub sampled: usize,
    pub errors: usize,
    /// The key with the publicly compared bits removed.
    pub remaining: SiftedKey,
}

/// Publicly compares a random subset (without replacement) of the sifted key
/// and discards it.
pub fn estimate_qber<R: Rng + ?Sized>(
    key: &SiftedKey,
    sample_fraction: f64,
    rng: &mut R,
) -> Result<QberEstimate, QberError> {
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(QberError::BadFraction(sample_fraction));
    }
    if key.is_empty() {
        return Err(QberError::EmptyKey);
    }
    let n = key.len();
    let k = ((sample_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut chosen = vec![false; n];
    for i in index::sample(rng, n, k) {
        chosen[i] = true;
    }
    let mut errors = 0;
    let mut remaining = Vec::with_capacity(n - k);
    for (entry, picked) in key.entries.iter().zip(chosen) {
        if picked {
            errors += usize::from(entry.alice_bit != entry.bob_bit);
        } else {
            remaining.push(*entry);
        }
    }
    Ok(QberEstimate {
        qber: errors as f64 / k as f64,
        sampled: k,
        errors,
        remaining: SiftedKey { entries: remaining },
    })
}

/// `true` (abort) iff `qber > threshold`.
pub fn abort_decision(qber: f64, threshold: f64) -> bool {
    qber > threshold
}

/// Fraction of `key` bits Eve guesses right. Slots missing from her log get
/// a coin-flip guess from `rng`, so an absent Eve scores ≈ 0.5.
pub fn eve_info_accounting<R: Rng + ?Sized>(
    key: &SiftedKey,
    log: &EveLog,
    rng: &mut R,
) -> Option<f64> {
    if key.is_empty() {
        return None;
    }
    let correct = key
        .entries
        .iter()
        .filter(|e| {
            let guess = match log.get(e.slot) {
                Some(entry) => entry.guessed_bit,
                None => Bit::from_bool(rng.random::<bool>()),
            };
            guess == e.alice_bit
        })
        .count();
    Some(correct as f64 / key.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{ClickKind, ClickOutcome};
    use crate::optics::Basis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn alice(slot: u64, bit: u8, basis: Basis) -> AliceSlotRecord {
        AliceSlotRecord {
            slot,
            bit: Bit::new(bit).unwrap(),
            basis,
            emission_time: 0.0,
        }
    }

    fn bob(slot: u64, basis: Basis, kind: ClickKind) -> BobSlotRecord {
        let ts = (kind != ClickKind::None).then_some(0.0);
        BobSlotRecord {
            slot,
            basis,
            outcome: ClickOutcome {
                kind,
                timestamp: ts,
            },
            revealed_timestamp: ts,
        }
    }

    #[test]
    fn drops_mismatches_double_and_no_clicks() {
        let a = vec![
            alice(0, 0, Basis::Z),
            alice(1, 1, Basis::X),
            alice(2, 1, Basis::Z),
            alice(3, 0, Basis::X),
        ];
        let b = vec![
            bob(0, Basis::Z, ClickKind::D0),
            bob(1, Basis::Z, ClickKind::D1),
            bob(2, Basis::Z, ClickKind::Both),
            bob(3, Basis::X, ClickKind::None),
        ];
        let key = sift(&a, &b);
        assert_eq!(key.slots(), vec![0]);
    }

    #[test]
    fn all_mismatched_is_empty() {
        let a: Vec<_> = (0..10).map(|s| alice(s, 0, Basis::Z)).collect();
        let b: Vec<_> = (0..10).map(|s| bob(s, Basis::X, ClickKind::D0)).collect();
        assert!(sift(&a, &b).is_empty());
    }

    #[test]
    fn full_sample_is_exact_and_consumes_key() {
        let key = SiftedKey {
            entries: (0..8)
                .map(|s| SiftedEntry {
                    slot: s,
                    alice_bit: Bit::Zero,
                    bob_bit: if s % 3 == 0 { Bit::One } else { Bit::Zero },
                })
                .collect(),
        };
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let est = estimate_qber(&key, 1.0, &mut rng).unwrap();
        assert_eq!(est.qber, 3.0 / 8.0);
        assert!(est.remaining.is_empty());
        let half = estimate_qber(&key, 0.5, &mut rng).unwrap();
        assert_eq!(half.sampled, 4);
        assert_eq!(half.remaining.len(), 4);
        assert!(half
            .remaining
            .entries
            .windows(2)
            .all(|w| w[0].slot < w[1].slot));
    }

    #[test]
    fn qber_errors() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert_eq!(
            estimate_qber(&SiftedKey::default(), 0.5, &mut rng),
            Err(QberError::EmptyKey)
        );
        assert!(matches!(
            estimate_qber(&SiftedKey::default(), 0.0, &mut rng),
            Err(QberError::BadFraction(_))
        ));
    }

    #[test]
    fn abort_is_strict() {
        assert!(abort_decision(0.25, 0.11));
        assert!(!abort_decision(0.0, 0.11));
        assert!(!abort_decision(0.109, 0.11));
        assert!(!abort_decision(0.11, 0.11));
    }

    #[test]
    fn blind_guessing_is_half() {
        let key = SiftedKey {
            entries: (0..20_000)
                .map(|s| SiftedEntry {
                    slot: s,
                    alice_bit: Bit::from_bool(s % 2 == 0),
                    bob_bit: Bit::Zero,
                })
                .collect(),
        };
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let f = eve_info_accounting(&key, &EveLog::default(), &mut rng).unwrap();
        assert!((f - 0.5).abs() < 0.015, "{f}");
    }
}
