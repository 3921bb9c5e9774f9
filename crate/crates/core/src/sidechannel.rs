//! Timing side channel in the publicly revealed timestamps.
//!
//! Bob announces *when* he saw each click. If his two detectors stamp with
//! different centroids, the time alone tells Eve which detector fired, i.e.
//! the key bit. Eve's guess is scored under a two-Gaussian model per basis
//! (class means, pooled σ, equal priors): the ML rule is a midpoint threshold
//! and its accuracy is `Φ(d / 2σ)`. Leakage is reported as `1 − h(accuracy)`
//! bits per sifted bit, with `h` the binary entropy.
//!
//! Truncation is scored on the same fitted model: with timestamps rounded to
//! cells of width `r`, the best achievable accuracy is
//! `½ Σ_cells max(P0(cell), P1(cell))`, which can only fall when the cells
//! merge (e.g. `r → 3r`).

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::attacks::binary_entropy;
use crate::optics::Basis;
use crate::protocol::BobSlotRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimestampEvent {
    pub slot: u64,
    pub timestamp: f64,
    pub basis: Basis,
    /// Ground truth, used only for scoring.
    pub detector: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimestampLog {
    pub events: Vec<TimestampEvent>,
}

impl TimestampLog {
    /// Single clicks only. `revealed` picks the announced (possibly rounded)
    /// stamp over the full-precision one.
    pub fn from_bob_records(records: &[BobSlotRecord], revealed: bool) -> TimestampLog {
        let events = records
            .iter()
            .filter_map(|r| {
                let detector = r.outcome.kind.detector()?;
                let timestamp = if revealed {
                    r.revealed_timestamp
                } else {
                    r.outcome.timestamp
                }?;
                Some(TimestampEvent {
                    slot: r.slot,
                    timestamp,
                    basis: r.basis,
                    detector,
                })
            })
            .collect();
        TimestampLog { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Held-out split: alternates within each (basis, detector) class so
    /// both halves see every class regardless of how the log is ordered.
    pub fn split_alternate(&self) -> (TimestampLog, TimestampLog) {
        let mut seen = [0usize; 4];
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for e in &self.events {
            let c = &mut seen[class_index(e.basis, e.detector.min(1))];
            if *c % 2 == 0 {
                a.push(*e)
            } else {
                b.push(*e)
            }
            *c += 1;
        }
        (TimestampLog { events: a }, TimestampLog { events: b })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SideChannelError {
    #[error("no events for basis {basis}, detector D{detector}")]
    EmptyClass { basis: Basis, detector: usize },
    #[error("bin width must be > 0, got {0}")]
    BadBinWidth(f64),
    #[error("resolution must be >= 0, got {0}")]
    BadResolution(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingHistogram {
    pub basis: Basis,
    pub detector: usize,
    /// `counts.len() + 1` edges shared by all four classes.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n: u64,
    /// Unbinned mean; `None` for an empty class.
    pub centroid: Option<f64>,
    /// Unbinned sum of squared deviations from the centroid.
    pub sum_sq_dev: f64,
}

impl TimingHistogram {
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Index into the four-class arrays: basis-major, detector-minor.
fn class_index(basis: Basis, detector: usize) -> usize {
    (if basis == Basis::Z { 0 } else { 2 }) + detector
}

/// Four histograms (Z/D0, Z/D1, X/D0, X/D1) over common edges aligned to
/// multiples of `bin_width`. Centroids and spreads come from the raw stamps.
pub fn build_histograms(
    log: &TimestampLog,
    bin_width: f64,
) -> Result<Vec<TimingHistogram>, SideChannelError> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(SideChannelError::BadBinWidth(bin_width));
    }
    let (lo, hi) = log
        .events
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.timestamp), hi.max(e.timestamp))
        });
    let (first, nbins) = if log.is_empty() {
        (0.0, 0)
    } else {
        let first = (lo / bin_width).floor();
        let last = (hi / bin_width).floor();
        (first, (last - first) as usize + 1)
    };
    let edges: Vec<f64> = if nbins == 0 {
        vec![]
    } else {
        (0..=nbins)
            .map(|i| (first + i as f64) * bin_width)
            .collect()
    };

    let mut sums = [0.0f64; 4];
    let mut ns = [0u64; 4];
    let mut counts = vec![vec![0u64; nbins]; 4];
    for e in &log.events {
        let c = class_index(e.basis, e.detector);
        sums[c] += e.timestamp;
        ns[c] += 1;
        let bin = ((e.timestamp / bin_width).floor() - first) as usize;
        counts[c][bin.min(nbins - 1)] += 1;
    }
    let mut ssd = [0.0f64; 4];
    for e in &log.events {
        let c = class_index(e.basis, e.detector);
        let mean = sums[c] / ns[c] as f64;
        ssd[c] += (e.timestamp - mean).powi(2);
    }

    let mut out = Vec::with_capacity(4);
    for basis in Basis::ALL {
        for detector in 0..2 {
            let c = class_index(basis, detector);
            out.push(TimingHistogram {
                basis,
                detector,
                edges: edges.clone(),
                counts: std::mem::take(&mut counts[c]),
                n: ns[c],
                centroid: (ns[c] > 0).then(|| sums[c] / ns[c] as f64),
                sum_sq_dev: ssd[c],
            });
        }
    }
    Ok(out)
}

/// Two-Gaussian model for one basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: [f64; 2],
    /// Pooled standard deviation.
    pub sigma: f64,
    pub n: [u64; 2],
}

impl GaussianFit {
    pub fn separation(&self) -> f64 {
        (self.mean[1] - self.mean[0]).abs()
    }

    /// ML decision: the class whose mean is nearer.
    pub fn classify(&self, t: f64) -> usize {
        usize::from((t - self.mean[1]).abs() < (t - self.mean[0]).abs())
    }
}

pub fn fit_basis(hists: &[TimingHistogram], basis: Basis) -> Result<GaussianFit, SideChannelError> {
    let pick = |detector| {
        hists
            .iter()
            .find(|h| h.basis == basis && h.detector == detector && !h.is_empty())
            .ok_or(SideChannelError::EmptyClass { basis, detector })
    };
    let (h0, h1) = (pick(0)?, pick(1)?);
    let n = h0.n + h1.n;
    let dof = n.saturating_sub(2).max(1) as f64;
    Ok(GaussianFit {
        mean: [
            h0.centroid.unwrap_or_default(),
            h1.centroid.unwrap_or_default(),
        ],
        sigma: ((h0.sum_sq_dev + h1.sum_sq_dev) / dof).sqrt(),
        n: [h0.n, h1.n],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuessAccuracy {
    pub accuracy: f64,
    pub info_bits: f64,
    pub separation: f64,
    pub sigma: f64,
    /// σ = 0 with distinct centroids.
    pub perfect_separation: bool,
}

impl GuessAccuracy {
    fn from_accuracy(fit: &GaussianFit, accuracy: f64, perfect_separation: bool) -> Self {
        GuessAccuracy {
            accuracy,
            info_bits: 1.0 - binary_entropy(accuracy),
            separation: fit.separation(),
            sigma: fit.sigma,
            perfect_separation,
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// `Φ(d / 2σ)` and the matching information for the fitted model.
pub fn model_accuracy(fit: &GaussianFit) -> GuessAccuracy {
    let d = fit.separation();
    if fit.sigma == 0.0 {
        let perfect = d > 0.0;
        return GuessAccuracy::from_accuracy(fit, if perfect { 1.0 } else { 0.5 }, perfect);
    }
    GuessAccuracy::from_accuracy(fit, std_normal().cdf(d / (2.0 * fit.sigma)), false)
}

pub fn eve_guess_accuracy(
    hists: &[TimingHistogram],
    basis: Basis,
) -> Result<GuessAccuracy, SideChannelError> {
    Ok(model_accuracy(&fit_basis(hists, basis)?))
}

/// Best accuracy on timestamps rounded to the nearest multiple of
/// `resolution`, under the fitted model. `resolution == 0` means no rounding.
pub fn rounded_accuracy(fit: &GaussianFit, resolution: f64) -> GuessAccuracy {
    if resolution <= 0.0 || fit.sigma == 0.0 {
        if fit.sigma == 0.0 && resolution > 0.0 {
            // Point masses: distinguishable iff they land in different cells.
            let cell = |m: f64| (m / resolution).round();
            let perfect = cell(fit.mean[0]) != cell(fit.mean[1]);
            return GuessAccuracy::from_accuracy(fit, if perfect { 1.0 } else { 0.5 }, perfect);
        }
        return model_accuracy(fit);
    }
    let z = std_normal();
    let reach = 10.0 * fit.sigma;
    let lo = ((fit.mean[0].min(fit.mean[1]) - reach) / resolution).floor() as i64;
    let hi = ((fit.mean[0].max(fit.mean[1]) + reach) / resolution).ceil() as i64;
    let mass =
        |mean: f64, a: f64, b: f64| z.cdf((b - mean) / fit.sigma) - z.cdf((a - mean) / fit.sigma);
    let mut total = 0.0;
    // Tails beyond the covered cells contribute max(P0, P1) ≤ their sum, which is < 1e-20.
    for k in lo..=hi {
        let a = (k as f64 - 0.5) * resolution;
        let b = (k as f64 + 0.5) * resolution;
        total += mass(fit.mean[0], a, b).max(mass(fit.mean[1], a, b));
    }
    let acc = (0.5 * total).clamp(0.5, 1.0);
    GuessAccuracy::from_accuracy(fit, acc, false)
}

/// Rounds every timestamp to the nearest multiple of `resolution`; zero
/// leaves the log untouched.
pub fn truncate_timestamps(
    log: &TimestampLog,
    resolution: f64,
) -> Result<TimestampLog, SideChannelError> {
    if !(resolution >= 0.0 && resolution.is_finite()) {
        return Err(SideChannelError::BadResolution(resolution));
    }
    let mut out = log.clone();
    if resolution > 0.0 {
        for e in &mut out.events {
            e.timestamp = round_to(e.timestamp, resolution);
        }
    }
    Ok(out)
}

pub fn round_to(t: f64, resolution: f64) -> f64 {
    if resolution > 0.0 {
        (t / resolution).round() * resolution
    } else {
        t
    }
}

/// Fraction of `test` events in `basis` whose detector the fitted ML rule
/// names correctly, with the number of events scored.
pub fn empirical_accuracy(fit: &GaussianFit, test: &TimestampLog, basis: Basis) -> (f64, usize) {
    let scored: Vec<bool> = test
        .events
        .iter()
        .filter(|e| e.basis == basis)
        .map(|e| fit.classify(e.timestamp) == e.detector)
        .collect();
    let n = scored.len();
    let correct = scored.iter().filter(|&&c| c).count();
    (
        if n == 0 {
            f64::NAN
        } else {
            correct as f64 / n as f64
        },
        n,
    )
}

/// Cross-check without the Gaussian assumption: classify each `test` event
/// by the larger normalized training-histogram count in its bin (ties and
/// out-of-range events guess D0).
pub fn histogram_ml_accuracy(
    train: &[TimingHistogram],
    test: &TimestampLog,
    basis: Basis,
) -> Result<(f64, usize), SideChannelError> {
    let pick = |detector| {
        train
            .iter()
            .find(|h| h.basis == basis && h.detector == detector && !h.is_empty())
            .ok_or(SideChannelError::EmptyClass { basis, detector })
    };
    let (h0, h1) = (pick(0)?, pick(1)?);
    let edges = &h0.edges;
    let width = if edges.len() > 1 {
        edges[1] - edges[0]
    } else {
        1.0
    };
    let mut correct = 0usize;
    let mut n = 0usize;
    for e in test.events.iter().filter(|e| e.basis == basis) {
        n += 1;
        let guess =
            if edges.len() > 1 && e.timestamp >= edges[0] && e.timestamp < edges[edges.len() - 1] {
                let bin =
                    (((e.timestamp - edges[0]) / width).floor() as usize).min(h0.counts.len() - 1);
                let p0 = h0.counts[bin] as f64 / h0.n as f64;
                let p1 = h1.counts[bin] as f64 / h1.n as f64;
                usize::from(p1 > p0)
            } else {
                0
            };
        correct += usize::from(guess == e.detector);
    }
    Ok((
        if n == 0 {
            f64::NAN
        } else {
            correct as f64 / n as f64
        },
        n,
    ))
}

/// Per-basis analysis entry of a timing report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisAnalysis {
    pub basis: Basis,
    pub fit: GaussianFit,
    pub model: GuessAccuracy,
    pub truncated: Option<GuessAccuracy>,
    pub empirical_accuracy: f64,
    pub histogram_accuracy: f64,
    pub held_out_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub measure: String,
    pub events: usize,
    pub bin_width: f64,
    pub truncate: Option<f64>,
    pub bases: Vec<BasisAnalysis>,
    /// Event-weighted mean of the per-basis information.
    pub info_bits: Option<f64>,
    pub truncated_info_bits: Option<f64>,
}

pub const INFO_MEASURE: &str = "1 - h(P_correct), P_correct = ML accuracy of guessing the clicking detector from the revealed timestamp under a pooled-sigma two-Gaussian fit, equal priors; bits per sifted bit";

/// Full analysis of an event log: fit on even-indexed events, held-out
/// scoring on odd ones, model leakage from the fit on all events.
pub fn analyze_timing(
    log: &TimestampLog,
    bin_width: f64,
    truncate: Option<f64>,
) -> Result<(TimingReport, Vec<TimingHistogram>), SideChannelError> {
    let hists = build_histograms(log, bin_width)?;
    let (train, test) = log.split_alternate();
    let train_hists = build_histograms(&train, bin_width)?;
    let mut bases = Vec::new();
    for basis in Basis::ALL {
        let Ok(fit) = fit_basis(&hists, basis) else {
            continue;
        };
        let model = model_accuracy(&fit);
        let truncated = match truncate {
            Some(r) if r < 0.0 || !r.is_finite() => return Err(SideChannelError::BadResolution(r)),
            Some(r) => Some(rounded_accuracy(&fit, r)),
            None => None,
        };
        let (empirical, held_out, histogram) = match fit_basis(&train_hists, basis) {
            Ok(train_fit) => {
                let (acc, n) = empirical_accuracy(&train_fit, &test, basis);
                let (hacc, _) = histogram_ml_accuracy(&train_hists, &test, basis)?;
                (acc, n, hacc)
            }
            Err(_) => (f64::NAN, 0, f64::NAN),
        };
        bases.push(BasisAnalysis {
            basis,
            fit,
            model,
            truncated,
            empirical_accuracy: empirical,
            histogram_accuracy: histogram,
            held_out_events: held_out,
        });
    }
    let weighted = |f: &dyn Fn(&BasisAnalysis) -> Option<f64>| {
        let (num, den) = bases.iter().fold((0.0, 0.0), |(num, den), b| match f(b) {
            Some(v) => {
                let w = (b.fit.n[0] + b.fit.n[1]) as f64;
                (num + w * v, den + w)
            }
            None => (num, den),
        });
        (den > 0.0).then(|| num / den)
    };
    let info_bits = weighted(&|b| Some(b.model.info_bits));
    let truncated_info_bits = weighted(&|b| b.truncated.map(|t| t.info_bits));
    let report = TimingReport {
        measure: INFO_MEASURE.to_string(),
        events: log.len(),
        bin_width,
        truncate,
        bases,
        info_bits,
        truncated_info_bits,
    };
    Ok((report, hists))
}

/// Leakage of one session: model fitted on Bob's full-precision stamps,
/// evaluated at the resolution he actually reveals, averaged over bases by
/// event count. `None` when no basis has events from both detectors.
pub fn session_timing_information(bob: &[BobSlotRecord], resolution: f64) -> Option<f64> {
    let log = TimestampLog::from_bob_records(bob, false);
    let hists = build_histograms(&log, 1.0).ok()?;
    let mut num = 0.0;
    let mut den = 0.0;
    for basis in Basis::ALL {
        if let Ok(fit) = fit_basis(&hists, basis) {
            if fit.n[0] + fit.n[1] < 3 {
                continue;
            }
            let w = (fit.n[0] + fit.n[1]) as f64;
            num += w * rounded_accuracy(&fit, resolution).info_bits;
            den += w;
        }
    }
    (den > 0.0).then(|| num / den)
}
