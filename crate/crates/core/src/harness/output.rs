//! File formats.
//!
//! All CSV floats are written with six decimals; empty cells mean "no
//! value" (no click, no timestamp). Column orders are fixed:
//!
//! | file              | columns |
//! |-------------------|---------|
//! | `events.csv`      | slot, alice_bit, alice_basis, bob_basis, outcome, timestamp |
//! | `eve_log.csv`     | slot, measured_basis, guessed_bit, action, polarization_deg, arrival_time, intensity |
//! | `sweep.csv`       | value, mean_qber, mean_eve_known_fraction, mean_timing_info_bits, mean_detection_rate, abort_fraction |
//! | `histograms.csv`  | basis, detector, bin_lo, bin_hi, count |
//! | `scan_profile.csv`| offset, counts_d0, counts_d1 |
//!
//! `outcome` is one of `none`, `D0`, `D1`, `both`; `timestamp` is the
//! publicly revealed stamp. JSON files (`summary.json`, `calibration.json`,
//! `timing_report.json`) are pretty-printed serde output with shortest
//! round-trip floats.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use super::runner::{HarnessError, Report, SweepReport};
use crate::attacks::EveLog;
use crate::calibration::CalibrationResult;
use crate::detector::ClickKind;
use crate::optics::{Basis, Bit};
use crate::protocol::{AliceSlotRecord, BobSlotRecord, SessionOutput};
use crate::sidechannel::{TimestampEvent, TimestampLog, TimingHistogram};

pub const EVENTS_HEADER: [&str; 6] = [
    "slot",
    "alice_bit",
    "alice_basis",
    "bob_basis",
    "outcome",
    "timestamp",
];

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fixed).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Other(format!("csv: {e}"))
}

pub fn write_events<W: Write>(
    w: W,
    alice: &[AliceSlotRecord],
    bob: &[BobSlotRecord],
) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(EVENTS_HEADER).map_err(csv_err)?;
    for (a, b) in alice.iter().zip(bob) {
        debug_assert_eq!(a.slot, b.slot);
        out.write_record([
            a.slot.to_string(),
            a.bit.to_string(),
            a.basis.label().to_string(),
            b.basis.label().to_string(),
            b.outcome.kind.label().to_string(),
            opt(b.revealed_timestamp),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// One parsed row of `events.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRow {
    pub slot: u64,
    pub alice_bit: Bit,
    pub alice_basis: Basis,
    pub bob_basis: Basis,
    pub outcome: ClickKind,
    pub timestamp: Option<f64>,
}

pub fn read_events<R: Read>(r: R) -> Result<Vec<EventRow>, HarnessError> {
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != EVENTS_HEADER {
        return Err(HarnessError::Other(format!(
            "unexpected event-log header: {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let bad =
            |what: &str| HarnessError::Other(format!("event log row {}: bad {what}", line + 2));
        let timestamp = match record[5].trim() {
            "" => None,
            t => Some(t.parse::<f64>().map_err(|_| bad("timestamp"))?),
        };
        rows.push(EventRow {
            slot: record[0].trim().parse().map_err(|_| bad("slot"))?,
            alice_bit: record[1]
                .trim()
                .parse::<u8>()
                .ok()
                .and_then(Bit::new)
                .ok_or_else(|| bad("alice_bit"))?,
            alice_basis: Basis::parse(&record[2]).ok_or_else(|| bad("alice_basis"))?,
            bob_basis: Basis::parse(&record[3]).ok_or_else(|| bad("bob_basis"))?,
            outcome: ClickKind::parse(&record[4]).ok_or_else(|| bad("outcome"))?,
            timestamp,
        });
    }
    Ok(rows)
}

/// The public timing record of an event log: single clicks with a stamp,
/// labelled by Bob's announced basis.
pub fn timestamp_log(rows: &[EventRow]) -> TimestampLog {
    let events = rows
        .iter()
        .filter_map(|r| {
            Some(TimestampEvent {
                slot: r.slot,
                timestamp: r.timestamp?,
                basis: r.bob_basis,
                detector: r.outcome.detector()?,
            })
        })
        .collect();
    TimestampLog { events }
}

pub fn write_eve_log<W: Write>(w: W, log: &EveLog) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "slot",
        "measured_basis",
        "guessed_bit",
        "action",
        "polarization_deg",
        "arrival_time",
        "intensity",
    ])
    .map_err(csv_err)?;
    for e in &log.entries {
        let (pol, arrival, intensity) = e.action.forwarded();
        out.write_record([
            e.slot.to_string(),
            e.measured_basis
                .map(|b| b.label().to_string())
                .unwrap_or_default(),
            e.guessed_bit.to_string(),
            e.action.label().to_string(),
            opt(pol.map(|p| p.degrees())),
            fixed(arrival),
            opt(intensity),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(w: W, report: &SweepReport) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "value",
        "mean_qber",
        "mean_eve_known_fraction",
        "mean_timing_info_bits",
        "mean_detection_rate",
        "abort_fraction",
    ])
    .map_err(csv_err)?;
    for p in &report.points {
        let a = &p.aggregate;
        out.write_record([
            fixed(p.value),
            opt(a.mean_qber),
            opt(a.mean_eve_known_fraction),
            opt(a.mean_timing_info_bits),
            opt(a.detection_rate.map(|d| d.value)),
            fixed(a.aborted as f64 / a.sessions.max(1) as f64),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_histograms<W: Write>(w: W, hists: &[TimingHistogram]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["basis", "detector", "bin_lo", "bin_hi", "count"])
        .map_err(csv_err)?;
    for h in hists {
        for (i, c) in h.counts.iter().enumerate() {
            out.write_record([
                h.basis.label().to_string(),
                format!("D{}", h.detector),
                fixed(h.edges[i]),
                fixed(h.edges[i + 1]),
                c.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_scan_profile<W: Write>(w: W, result: &CalibrationResult) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["offset", "counts_d0", "counts_d1"])
        .map_err(csv_err)?;
    for s in &result.scan_profile {
        out.write_record([
            fixed(s.offset),
            s.counts[0].to_string(),
            s.counts[1].to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// Writes `summary.json` and `events.csv` (from trial 0), plus
/// `eve_log.csv` when an eavesdropper ran and `calibration.json` /
/// `scan_profile.csv` when Bob calibrated.
pub fn write_run_outputs(
    dir: &Path,
    report: &Report,
    first: &SessionOutput,
    with_eve: bool,
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.json"), report.to_json())?;
    write_events(
        fs::File::create(dir.join("events.csv"))?,
        &first.alice,
        &first.bob,
    )?;
    if with_eve {
        write_eve_log(fs::File::create(dir.join("eve_log.csv"))?, &first.eve_log)?;
    }
    if let Some(cal) = &first.calibration {
        write_calibration(dir, cal)?;
    }
    Ok(())
}

pub fn write_calibration(dir: &Path, result: &CalibrationResult) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("calibration.json"), to_json(result))?;
    write_scan_profile(fs::File::create(dir.join("scan_profile.csv"))?, result)
}
