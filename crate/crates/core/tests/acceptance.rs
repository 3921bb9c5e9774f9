//! Acceptance suite. Runs as a plain binary (`harness = false`) so every
//! criterion prints exactly one PASS/FAIL line; failing sub-checks are
//! listed underneath. Tolerances are pinned as constants at the top of each
//! criterion and are not derived from the data under test.

use std::process::ExitCode;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use qkdlab::attacks::{
    plan_faked_states, time_shift_information, AfterGateParams, FakedStatesParams, StrategySpec,
    TimeShiftParams,
};
use qkdlab::calibration::CalibrationResult;
use qkdlab::detector::{ClickKind, DetectorPair, DetectorParams, GateSchedule};
use qkdlab::harness::{builtin, run_scenario, run_sweep, run_trial, SessionConfig};
use qkdlab::optics::{detection_probabilities, encode_bit, Basis, Bit, Polarization};
use qkdlab::protocol::mbp::tables::{ENCODING, INTERCEPTED_ENCODING};
use qkdlab::protocol::mbp::{reproduce_tables, Keyword};
use qkdlab::protocol::{OpticalPulse, SessionOutput};
use qkdlab::sidechannel::{analyze_timing, rounded_accuracy, TimestampLog};

struct Criterion {
    id: u8,
    title: &'static str,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    fn new(id: u8, title: &'static str) -> Self {
        Criterion {
            id,
            title,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn within(&mut self, what: &str, value: f64, target: f64, tol: f64) {
        self.check(
            format!("{what}: {value:.6} vs {target:.6} ± {tol:.6}"),
            (value - target).abs() <= tol,
        );
    }

    fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|(_, ok)| *ok)
    }
}

fn binomial_4sigma(p: f64, n: u64) -> f64 {
    4.0 * (p * (1.0 - p) / n as f64).sqrt()
}

fn run0(cfg: &SessionConfig) -> SessionOutput {
    run_trial(cfg, 0).expect("session runs")
}

/// Independent raised-cosine gate, offset by `offset`.
fn eta(t: f64, offset: f64, peak: f64) -> f64 {
    use std::f64::consts::PI;
    let x = t - offset;
    if x <= -1.0 || x >= 1.0 {
        0.0
    } else if x < -0.5 {
        peak * (1.0 - (PI * (x + 1.0) / 0.5).cos()) / 2.0
    } else if x <= 0.5 {
        peak
    } else {
        peak * (1.0 + (PI * (x - 0.5) / 0.5).cos()) / 2.0
    }
}

fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

// 1 -----------------------------------------------------------------------

fn table_reproduction() -> Criterion {
    const MAX_SECONDS: f64 = 1.0;
    let mut c = Criterion::new(1, "table reproduction (exact)");
    let start = Instant::now();
    let report = match reproduce_tables() {
        Ok(r) => r,
        Err(e) => {
            c.check(format!("scripted run failed: {e}"), false);
            return c;
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    for m in &report.mismatches {
        c.check(format!("cell {m}"), false);
    }
    c.check("every reference cell matches", report.is_exact());

    // Encoding by hand: OD = odd, EV = even, L3 = less than 3, M2 = more than 2.
    let satisfies = |k: Keyword, n: u8| match k {
        Keyword::OD => n % 2 == 1,
        Keyword::EV => n % 2 == 0,
        Keyword::L3 => n < 3,
        Keyword::M2 => n > 2,
    };
    c.check(
        "encoding table consistent",
        ENCODING
            .iter()
            .all(|&(k, n)| (1..=4).contains(&n) && satisfies(k, n)),
    );
    c.check(
        "intercepted encoding consistent",
        INTERCEPTED_ENCODING.iter().all(|&(k, n)| satisfies(k, n)),
    );

    let kept = report.direct.kept_slots();
    c.check(
        format!("direct kept slots {kept:?}"),
        kept == [1, 3, 4, 5, 6, 8, 11, 12],
    );
    let key: String = report
        .direct
        .sifted
        .bob_bits()
        .iter()
        .map(|b| b.to_string())
        .collect();
    c.check(format!("direct key {key}"), key == "11010010");
    let errors = report.intercepted.session.error_slots();
    c.check(
        format!("intercepted error slots {errors:?}"),
        errors == [5, 8, 11],
    );
    let q = report.intercepted.session.qber();
    c.check(format!("intercepted qber {q:?}"), q == Some(3.0 / 8.0));
    c.check(
        format!("runtime {elapsed:.4}s < {MAX_SECONDS}s"),
        elapsed < MAX_SECONDS,
    );
    c
}

// 2 -----------------------------------------------------------------------

fn intercept_resend() -> Criterion {
    const QBER: f64 = 0.25;
    const ACC: f64 = 0.75;
    const TOL: f64 = 0.01;
    let mut c = Criterion::new(
        2,
        "intercept-resend QBER 0.25 ± 0.01, Eve accuracy 0.75 ± 0.01",
    );
    let cfg = builtin("intercept_resend").unwrap();
    c.check("10^5 pulses", cfg.num_pulses == 100_000);
    let out = run0(&cfg);
    c.within(
        "sampled QBER",
        out.stats.qber.unwrap_or(f64::NAN),
        QBER,
        TOL,
    );
    let sifted_qber = out.sifted.errors() as f64 / out.sifted.len() as f64;
    c.within("QBER over all sifted bits", sifted_qber, QBER, TOL);
    c.within(
        "Eve sifted-bit accuracy",
        out.stats.eve_sifted_accuracy.unwrap_or(f64::NAN),
        ACC,
        TOL,
    );
    c.check("session aborts", out.stats.abort);
    c
}

// 3 -----------------------------------------------------------------------

fn clean_channel() -> Criterion {
    const SIFT: f64 = 0.5;
    const TOL: f64 = 0.01;
    let mut c = Criterion::new(3, "clean channel: QBER exactly 0, sift fraction 0.5 ± 0.01");
    let out = run0(&builtin("no_eve_ideal").unwrap());
    c.check(
        format!("QBER {:?}", out.stats.qber),
        out.stats.qber == Some(0.0),
    );
    c.check("no sifted errors", out.sifted.errors() == 0);
    c.within("sift fraction", out.stats.sift_fraction, SIFT, TOL);
    c.check("no abort", !out.stats.abort);
    c
}

// 4 -----------------------------------------------------------------------

fn detector_realism() -> Criterion {
    const PEAK: f64 = 0.10;
    const RATE_TOL: f64 = 0.005;
    const PHOTONS: u64 = 100_000;
    const GATES: u64 = 10_000_000;
    const RATIO: f64 = 1e5;
    let mut c = Criterion::new(
        4,
        "detector realism: aligned click rate 0.10 ± 0.005, dark ratio 10^5",
    );

    let defaults = DetectorParams::default();
    c.check("default peak 0.10", defaults.curve.peak == PEAK);
    c.check(
        "default dark probability 1e-6",
        defaults.dark_count_prob == PEAK / RATIO,
    );

    // Aligned photons, one per slot, spaced beyond the dead time.
    let schedule = GateSchedule {
        period: 2.0 * defaults.dead_time,
        ..GateSchedule::default()
    };
    let mut pair = DetectorPair::new([defaults; 2], schedule);
    let mut rng = ChaCha20Rng::seed_from_u64(404);
    let mut clicks = 0u64;
    for slot in 0..PHOTONS {
        let pulse = OpticalPulse::single_photon(slot, 0.0, Polarization::H);
        if pair
            .detect_slot(slot, &[pulse], Basis::Z, &mut rng)
            .unwrap()
            .kind
            != ClickKind::None
        {
            clicks += 1;
        }
    }
    let rate = clicks as f64 / PHOTONS as f64;
    c.within("aligned-photon click rate", rate, PEAK, RATE_TOL);

    let mut pair = DetectorPair::new([defaults; 2], GateSchedule::default());
    let mut dark = 0u64;
    for slot in 0..GATES {
        let out = pair.detect_slot(slot, &[], Basis::Z, &mut rng).unwrap();
        if out.kind != ClickKind::None {
            dark += 1;
        }
    }
    // Two detectors per gate.
    let expected = 2.0 * defaults.dark_count_prob * GATES as f64;
    let tol = 4.0 * expected.sqrt();
    c.check(
        format!("vacuum clicks {dark} vs {expected:.1} ± {tol:.1} (Poisson 4σ)"),
        (dark as f64 - expected).abs() <= tol,
    );
    let per_detector = dark as f64 / (2.0 * GATES as f64);
    let ratio = rate / per_detector;
    let lo = (PEAK - RATE_TOL) / ((expected + tol) / (2.0 * GATES as f64));
    let hi = (PEAK + RATE_TOL) / ((expected - tol).max(1.0) / (2.0 * GATES as f64));
    c.check(
        format!("click/dark ratio {ratio:.3e} within [{lo:.3e}, {hi:.3e}] around 1e5"),
        ratio >= lo && ratio <= hi,
    );
    c
}

// 5 -----------------------------------------------------------------------

#[derive(Debug, Default, Clone, Copy)]
struct FakedOracle {
    detection: f64,
    sifted: f64,
    errors: f64,
    eve_right: f64,
}

impl FakedOracle {
    fn qber(&self) -> f64 {
        self.errors / self.sifted
    }
    fn eve_known(&self) -> f64 {
        self.eve_right / self.sifted
    }
}

/// Exhaustive enumeration over Alice's bit and basis, Eve's basis and
/// outcome, Bob's basis and the polarizing-beam-splitter routing. `eta[y][k]`
/// is detector k's efficiency at the time Eve uses to force bit y.
fn faked_states_oracle(eta: [[f64; 2]; 2]) -> FakedOracle {
    let mut o = FakedOracle::default();
    for a in 0..2 {
        for x in 0..2 {
            for e in 0..2 {
                for y in 0..2 {
                    let p_y = if e == a {
                        f64::from(u8::from(y == x))
                    } else {
                        0.5
                    };
                    // Resent state: bit 1-y in basis 1-e.
                    let (state_bit, state_basis) = (1 - y, 1 - e);
                    for b in 0..2 {
                        for k in 0..2 {
                            let route = if b == state_basis {
                                f64::from(u8::from(k == state_bit))
                            } else {
                                0.5
                            };
                            let p = 0.25 * 0.5 * p_y * 0.5 * route * eta[y][k];
                            o.detection += p;
                            if b == a {
                                o.sifted += p;
                                if k != x {
                                    o.errors += p;
                                }
                                if y == x {
                                    o.eve_right += p;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    o
}

fn faked_states() -> Criterion {
    const ZERO_DEM_QBER: f64 = 0.5;
    const ZERO_DEM_TOL: f64 = 0.02;
    let mut c = Criterion::new(
        5,
        "faked states: perfect DEM QBER 0, Eve 1.0, rate η/4; zero DEM QBER 0.50 ± 0.02",
    );

    let cfg = builtin("faked_states_perfect_dem").unwrap();
    let StrategySpec::FakedStatesDem(params) = cfg.strategy else {
        unreachable!()
    };
    let plan = plan_faked_states(&params, &cfg.detectors.pair(), &cfg.schedule).unwrap();
    let peak = cfg.detectors.d0.curve.peak;
    let off1 = cfg.schedule.gate_offset_d1;
    let table = |t: f64| [eta(t, 0.0, peak), eta(t, off1, peak)];
    let oracle = faked_states_oracle([table(plan.times[0]), table(plan.times[1])]);
    c.check(
        format!("oracle QBER {:.6} is 0", oracle.qber()),
        oracle.qber() == 0.0,
    );
    c.check(
        format!("oracle Eve knowledge {:.6} is 1", oracle.eve_known()),
        oracle.eve_known() == 1.0,
    );
    c.within("oracle detection rate", oracle.detection, peak / 4.0, 1e-12);

    let out = run0(&cfg);
    c.check(
        format!("QBER {:?} is 0", out.stats.qber),
        out.stats.qber == Some(0.0),
    );
    c.check(
        format!("eve_known_fraction {:?} is 1", out.stats.eve_known_fraction),
        out.stats.eve_known_fraction == Some(1.0),
    );
    let n = out.stats.pulses_sent;
    c.within(
        "detection rate",
        out.stats.detection_rate,
        oracle.detection,
        binomial_4sigma(oracle.detection, n),
    );
    c.check("no abort", !out.stats.abort);

    // Same attack against aligned gates.
    let mut zero = cfg.clone();
    zero.schedule.gate_offset_d1 = 0.0;
    zero.num_pulses = 400_000;
    zero.sample_fraction = 1.0;
    zero.strategy = StrategySpec::FakedStatesDem(FakedStatesParams {
        strict: false,
        ..params
    });
    let plan = plan_faked_states(
        &FakedStatesParams {
            strict: false,
            ..params
        },
        &zero.detectors.pair(),
        &zero.schedule,
    )
    .unwrap();
    let table = |t: f64| [eta(t, 0.0, peak), eta(t, 0.0, peak)];
    let oracle = faked_states_oracle([table(plan.times[0]), table(plan.times[1])]);
    c.within("zero-DEM oracle QBER", oracle.qber(), ZERO_DEM_QBER, 1e-12);
    let out = run0(&zero);
    c.within(
        "zero-DEM QBER",
        out.stats.qber.unwrap_or(f64::NAN),
        ZERO_DEM_QBER,
        ZERO_DEM_TOL,
    );
    c.within(
        "zero-DEM detection rate",
        out.stats.detection_rate,
        oracle.detection,
        binomial_4sigma(oracle.detection, zero.num_pulses),
    );
    let strict = plan_faked_states(&params, &zero.detectors.pair(), &zero.schedule);
    c.check("strict planner refuses aligned gates", strict.is_err());
    c
}

// 6 -----------------------------------------------------------------------

fn calibration_spoofing() -> Criterion {
    const DELTA: f64 = 0.4;
    const QBER_THRESHOLD: f64 = 0.11;
    const EVE_MIN: f64 = 0.9;
    let mut c = Criterion::new(
        6,
        "calibration spoof: offset difference 0.4 ± one step, session passes, Eve > 0.9",
    );
    let cfg = builtin("calibration_spoof").unwrap();
    let cal_cfg = cfg.calibration.unwrap();
    c.check(
        "spoof delta is 0.4",
        matches!(cfg.strategy, StrategySpec::CalibrationSpoof(p) if p.delta == DELTA),
    );
    let out = run0(&cfg);
    let cal: &CalibrationResult = out.calibration.as_ref().expect("calibration ran");
    let diff = cal.offset_d1 - cal.offset_d0;
    c.within(
        "calibrated offset difference",
        diff,
        DELTA,
        cal_cfg.scan_step + 1e-9,
    );
    c.check(
        format!(
            "schedule uses the calibrated offsets ({:.3}, {:.3})",
            out.schedule.gate_offset_d0, out.schedule.gate_offset_d1
        ),
        out.schedule.gate_offset_d0 == cal.offset_d0
            && out.schedule.gate_offset_d1 == cal.offset_d1,
    );

    // Spoofed sync pulse: D-polarized first half lands entirely on D0, whose
    // gate plateau covers it at the argmax; A-polarized second half on D1.
    let photons = cal_cfg.num_pulses_per_step as u64 * cal_cfg.pulse_intensity as u64;
    let peak = cfg.detectors.d0.curve.peak;
    let expected = 0.5 * peak;
    let counts = cal.peak_counts();
    for (k, &count) in counts.iter().enumerate() {
        let rate = count as f64 / photons as f64;
        c.within(
            &format!("argmax count rate D{k}"),
            rate,
            expected,
            binomial_4sigma(expected, photons),
        );
    }

    let qber = out.stats.qber.unwrap_or(f64::NAN);
    c.check(
        format!("QBER {qber:.6} < {QBER_THRESHOLD}"),
        qber < QBER_THRESHOLD,
    );
    c.check("session not aborted", !out.stats.abort);
    let eve = out.stats.eve_known_fraction.unwrap_or(0.0);
    c.check(
        format!("eve_known_fraction {eve:.6} > {EVE_MIN}"),
        eve > EVE_MIN,
    );

    // Without the spoof the same pulses calibrate both gates to one offset
    // and the attack has nothing to work with.
    let mut honest = cfg.clone();
    honest.strategy = StrategySpec::None;
    let out = run0(&honest);
    let cal = out.calibration.unwrap();
    c.check(
        format!(
            "honest calibration agrees ({:.3}, {:.3})",
            cal.offset_d0, cal.offset_d1
        ),
        cal.offset_d0 == cal.offset_d1,
    );
    // Unspoofed H in X: half the photons per detector, averaged over the gate.
    let expected = 0.5 * 0.75 * peak;
    for (k, &count) in cal.peak_counts().iter().enumerate() {
        let rate = count as f64 / photons as f64;
        c.within(
            &format!("honest argmax count rate D{k}"),
            rate,
            expected,
            binomial_4sigma(expected, photons),
        );
    }
    let mut attacked = cfg.clone();
    attacked.strategy = StrategySpec::FakedStatesDem(FakedStatesParams::default());
    let result = run_trial(&attacked, 0);
    c.check(
        "faked states refuse an honestly calibrated pair",
        result.is_err(),
    );
    c
}

// 7 -----------------------------------------------------------------------

/// Closed form per sifted bit for the after-gate attack (no dark counts).
fn after_gate_analytic(pa: f64) -> (f64, f64) {
    let valid = 0.5 - pa / 4.0 + pa * (1.0 - pa) / 2.0;
    let errors = pa * (1.0 - pa) / 4.0;
    (errors / valid, 1.0 - errors / valid)
}

/// Slot-level Monte Carlo of the same attack, written from the physical
/// description: a matching basis forces Eve's bit; a mismatch arms both
/// detectors, each of which fires with `pa` in the next gate.
fn after_gate_monte_carlo(pa: f64, slots: u64, seed: u64) -> (f64, f64, u64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut armed = [false; 2];
    let (mut sifted, mut errors, mut eve_right) = (0u64, 0u64, 0u64);
    for _ in 0..slots {
        let mut fired = [false; 2];
        for k in 0..2 {
            if std::mem::take(&mut armed[k]) && rng.random_bool(pa) {
                fired[k] = true;
            }
        }
        let (x, a): (u8, u8) = (rng.random_range(0..2), rng.random_range(0..2));
        let e: u8 = rng.random_range(0..2);
        let y = if e == a { x } else { rng.random_range(0..2) };
        let b: u8 = rng.random_range(0..2);
        if b == e {
            fired[y as usize] = true;
        } else {
            armed = [true, true];
        }
        let bob_bit = match fired {
            [true, false] => 0,
            [false, true] => 1,
            _ => continue,
        };
        if a == b {
            sifted += 1;
            errors += u64::from(bob_bit != x);
            eve_right += u64::from(y == x);
        }
    }
    (
        errors as f64 / sifted as f64,
        eve_right as f64 / sifted as f64,
        sifted,
    )
}

fn after_gate() -> Criterion {
    const QBER_LIMIT: f64 = 0.11;
    const EVE_MIN: f64 = 0.9;
    const TRIALS: u64 = 20;
    let mut c = Criterion::new(
        7,
        "after-gate: pa = 0 gives QBER 0 and full control; shipped scenario QBER < 0.11",
    );

    let base = builtin("after_gate").unwrap();
    let mut clean = base.clone();
    for d in [&mut clean.detectors.d0, &mut clean.detectors.d1] {
        d.afterpulse_prob = 0.0;
        d.dark_count_prob = 0.0;
    }
    let out = run0(&clean);
    c.check(
        format!("pa = 0: QBER {:?}", out.stats.qber),
        out.stats.qber == Some(0.0),
    );
    c.check(
        format!(
            "pa = 0: eve_known_fraction {:?}",
            out.stats.eve_known_fraction
        ),
        out.stats.eve_known_fraction == Some(1.0),
    );
    let bob_matches_eve = out.sifted.entries.iter().all(|s| {
        out.eve_log
            .get(s.slot)
            .is_some_and(|e| e.guessed_bit == s.bob_bit)
    });
    c.check(
        "pa = 0: every sifted bit equals Eve's chosen bit",
        bob_matches_eve,
    );

    let pa = base.detectors.d0.afterpulse_prob;
    c.check(
        "shipped afterpulse probability is 0.05 on both",
        pa == 0.05 && base.detectors.d1.afterpulse_prob == pa,
    );
    let report = run_scenario(&base, TRIALS).unwrap();
    let agg = &report.aggregate;
    let mean_qber = agg.mean_qber.unwrap_or(f64::NAN);
    c.check(
        format!("{TRIALS} trials: mean QBER {mean_qber:.6} < {QBER_LIMIT}"),
        mean_qber < QBER_LIMIT,
    );
    c.check(
        format!("no trial aborted ({}/{})", agg.aborted, agg.sessions),
        agg.aborted == 0,
    );
    let eve = agg.mean_eve_known_fraction.unwrap_or(0.0);
    c.check(
        format!("mean eve_known_fraction {eve:.6} > {EVE_MIN}"),
        eve > EVE_MIN,
    );

    let (q_exact, eve_exact) = after_gate_analytic(pa);
    let (q_mc, eve_mc, n_mc) = after_gate_monte_carlo(pa, 2_000_000, 77);
    c.within(
        "Monte-Carlo oracle QBER vs closed form",
        q_mc,
        q_exact,
        binomial_4sigma(q_exact, n_mc),
    );
    c.within(
        "Monte-Carlo oracle Eve accuracy vs closed form",
        eve_mc,
        eve_exact,
        binomial_4sigma(eve_exact, n_mc),
    );
    let pooled = agg.qber.unwrap();
    c.within(
        "simulated pooled QBER vs oracle",
        pooled.value,
        q_exact,
        binomial_4sigma(q_exact, pooled.trials),
    );
    c
}

// 8 -----------------------------------------------------------------------

fn side_channel() -> Criterion {
    const MIN_INFO: f64 = 0.25;
    const SEPARATION: f64 = 0.5;
    const NESTED_GRID: [f64; 7] = [0.0, 0.01, 0.03, 0.09, 0.27, 0.81, 2.43];
    let mut c = Criterion::new(
        8,
        "side channel: ≥ 0.25 bits at 0.5 ns, held-out accuracy Φ(d/2σ), monotone truncation",
    );
    let cfg = builtin("sidechannel_0p5ns").unwrap();
    let sigma = cfg.detectors.d0.jitter_sigma;
    c.check(
        format!("scenario separation {SEPARATION} ns, σ {sigma} ns"),
        cfg.detectors.d1.centroid_offset - cfg.detectors.d0.centroid_offset == SEPARATION
            && cfg.detectors.d1.jitter_sigma == sigma,
    );
    let phi = Normal::new(0.0, 1.0)
        .unwrap()
        .cdf(SEPARATION / (2.0 * sigma));
    let info_exact = 1.0 - h2(phi);
    c.check(
        format!("analytic leakage {info_exact:.6} ≥ {MIN_INFO}"),
        info_exact >= MIN_INFO,
    );

    let out = run0(&cfg);
    let log = TimestampLog::from_bob_records(&out.bob, true);
    let (report, _) = analyze_timing(&log, 0.05, None).unwrap();
    let info = report.info_bits.unwrap_or(0.0);
    c.check(
        format!("measured leakage {info:.6} ≥ {MIN_INFO} bits per sifted bit"),
        info >= MIN_INFO,
    );
    c.check(
        format!(
            "session leakage {:?} ≥ {MIN_INFO}",
            out.stats.timing_info_bits
        ),
        out.stats.timing_info_bits.unwrap_or(0.0) >= MIN_INFO,
    );
    for b in &report.bases {
        c.within(
            &format!(
                "basis {} held-out accuracy ({} events)",
                b.basis, b.held_out_events
            ),
            b.empirical_accuracy,
            phi,
            binomial_4sigma(phi, b.held_out_events as u64),
        );
    }
    c.check("both bases analyzed", report.bases.len() == 2);

    // Model-level sweep on the fitted parameters.
    for b in &report.bases {
        let infos: Vec<f64> = NESTED_GRID
            .iter()
            .map(|&r| rounded_accuracy(&b.fit, r).info_bits)
            .collect();
        let monotone = infos.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        c.check(
            format!(
                "basis {} fitted-model truncation sweep monotone {infos:.4?}",
                b.basis
            ),
            monotone,
        );
    }
    // Harness sweep over the revealed resolution.
    let mut small = cfg.clone();
    small.num_pulses = 40_000;
    let sweep = run_sweep(&small, "timestamp_resolution", &NESTED_GRID, 1).unwrap();
    let infos: Vec<f64> = sweep
        .points
        .iter()
        .map(|p| p.aggregate.mean_timing_info_bits.unwrap_or(f64::NAN))
        .collect();
    c.check(
        format!("sweep column monotone non-increasing {infos:.4?}"),
        infos.windows(2).all(|w| w[1] <= w[0] + 1e-12),
    );
    c.check(
        "coarsest resolution erases most leakage",
        infos[infos.len() - 1] < 0.05,
    );
    c
}

// 9 -----------------------------------------------------------------------

fn property_suites() -> Criterion {
    let mut c = Criterion::new(9, "property suites: normalization, conjugate routing, determinism, sift audit, time-shift info");
    let prop = |cases: u32| {
        TestRunner::new(PropConfig {
            cases,
            failure_persistence: None,
            ..PropConfig::default()
        })
    };

    let normalization = prop(2000).run(&(-720.0f64..720.0, any::<bool>()), |(angle, diag)| {
        let (p0, p1) =
            detection_probabilities(Polarization::from_degrees(angle), Basis::from_bool(diag));
        prop_assert!((0.0..=1.0).contains(&p0) && (0.0..=1.0).contains(&p1));
        prop_assert!((p0 + p1 - 1.0).abs() < 1e-12);
        Ok(())
    });
    c.check(
        format!("pD0 + pD1 = 1: {normalization:?}"),
        normalization.is_ok(),
    );

    let conjugate = prop(256).run(&(any::<bool>(), any::<bool>()), |(one, diag)| {
        let basis = Basis::from_bool(diag);
        let (p0, p1) =
            detection_probabilities(encode_bit(Bit::from_bool(one), basis), basis.other());
        prop_assert!((p0 - 0.5).abs() < 1e-12 && (p1 - 0.5).abs() < 1e-12);
        Ok(())
    });
    c.check(
        format!("conjugate basis routes 50/50: {conjugate:?}"),
        conjugate.is_ok(),
    );
    let mut pair = DetectorPair::new([DetectorParams::ideal(); 2], GateSchedule::default());
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let n = 100_000u64;
    let d0 = (0..n)
        .filter(|&slot| {
            let pulse = OpticalPulse::single_photon(slot, 0.0, encode_bit(Bit::Zero, Basis::Z));
            pair.detect_slot(slot, &[pulse], Basis::X, &mut rng)
                .unwrap()
                .kind
                == ClickKind::D0
        })
        .count();
    c.within(
        "simulated conjugate D0 fraction",
        d0 as f64 / n as f64,
        0.5,
        binomial_4sigma(0.5, n),
    );

    let mut cfg = SessionConfig::minimal(2024, 5000);
    cfg.strategy = StrategySpec::InterceptResend;
    cfg.channel.loss = 0.2;
    let reports: Vec<String> = [1usize, 2, 8]
        .iter()
        .map(|&threads| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_scenario(&cfg, 6).unwrap().to_json())
        })
        .collect();
    c.check(
        "identical reports on 1, 2 and 8 threads",
        reports.windows(2).all(|w| w[0] == w[1]),
    );

    let strategies = prop_oneof![
        Just(StrategySpec::None),
        Just(StrategySpec::InterceptResend),
        Just(StrategySpec::AfterGate(AfterGateParams {
            pulse_power: 1500.0,
            pulse_time_offset: 2.0
        })),
    ];
    let audit = prop(24).run(
        &(
            any::<u64>(),
            0.0f64..0.5,
            0.0f64..0.05,
            0.0f64..0.5,
            strategies,
        ),
        |(seed, loss, dark, ap, strategy)| {
            let mut cfg = SessionConfig::minimal(seed, 1500);
            cfg.channel.loss = loss;
            for d in [&mut cfg.detectors.d0, &mut cfg.detectors.d1] {
                d.dark_count_prob = dark;
                d.afterpulse_prob = ap;
                d.dead_time = 0.0;
            }
            cfg.strategy = strategy;
            let out = run0(&cfg);
            let mut expected = Vec::new();
            for (a, b) in out.alice.iter().zip(&out.bob) {
                if a.basis == b.basis {
                    if let Some(k) = b.outcome.kind.detector() {
                        expected.push((a.slot, a.bit, Bit::from_bool(k == 1)));
                    }
                }
            }
            let got: Vec<_> = out
                .sifted
                .entries
                .iter()
                .map(|e| (e.slot, e.alice_bit, e.bob_bit))
                .collect();
            prop_assert_eq!(got, expected);
            Ok(())
        },
    );
    c.check(
        format!("sift keeps exactly the matched single clicks: {audit:?}"),
        audit.is_ok(),
    );

    // Time shift with both detectors partially live at each shifted time.
    for (t_early, t_late) in [(-0.3, 0.7), (-0.45, 0.85), (-0.6, 1.0)] {
        let mut cfg = SessionConfig::minimal(31, 200_000);
        cfg.schedule.gate_offset_d1 = 0.4;
        for d in [&mut cfg.detectors.d0, &mut cfg.detectors.d1] {
            d.dead_time = 0.0;
            d.dark_count_prob = 0.0;
        }
        cfg.strategy = StrategySpec::TimeShift(TimeShiftParams {
            t_early,
            t_late,
            early_bit: Bit::Zero,
            early_probability: 0.5,
        });
        let out = run0(&cfg);
        let peak = cfg.detectors.d0.curve.peak;
        for (t, label) in [(t_early, "early"), (t_late, "late")] {
            let (e0, e1) = (eta(t, 0.0, peak), eta(t, 0.4, peak));
            let (posterior, info) = time_shift_information(e0, e1).unwrap();
            let at_t: Vec<_> = out
                .sifted
                .entries
                .iter()
                .filter(|s| matches!(out.eve_log.get(s.slot).map(|e| e.action), Some(qkdlab::attacks::EveAction::Shift { arrival_time }) if arrival_time == t))
                .collect();
            let n = at_t.len() as u64;
            let zeros = at_t.iter().filter(|s| s.bob_bit == Bit::Zero).count() as f64 / n as f64;
            c.check(
                format!("formula info at {t}: {info:.6} = 1 − h({posterior:.6})"),
                (info - (1.0 - h2(posterior))).abs() < 1e-12,
            );
            c.within(
                &format!("{label} shift t = {t}: P(bit 0 | click) over {n} sifted"),
                zeros,
                posterior,
                binomial_4sigma(posterior, n).max(1e-12),
            );
        }
    }
    c
}

fn main() -> ExitCode {
    let criteria: [fn() -> Criterion; 9] = [
        table_reproduction,
        intercept_resend,
        clean_channel,
        detector_realism,
        faked_states,
        calibration_spoofing,
        after_gate,
        side_channel,
        property_suites,
    ];
    let mut failed = 0;
    for run in criteria {
        let start = Instant::now();
        let c = run();
        let status = if c.passed() { "PASS" } else { "FAIL" };
        println!(
            "acceptance {} {status} {} ({:.2}s)",
            c.id,
            c.title,
            start.elapsed().as_secs_f64()
        );
        for (what, ok) in &c.checks {
            if !ok || std::env::var_os("ACCEPTANCE_VERBOSE").is_some() {
                println!("    {} {what}", if *ok { "ok  " } else { "FAIL" });
            }
        }
        failed += usize::from(!c.passed());
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
