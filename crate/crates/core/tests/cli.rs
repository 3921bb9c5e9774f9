use std::fs;
use std::path::Path;
use std::process::Command;

fn qkdlab(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qkdlab"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn run_writes_logs_and_exit_status_tracks_abort() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = write_scenario(
        tmp.path(),
        "clean",
        "seed = 4\nnum_pulses = 3000\n[channel]\nloss = 0.1\n",
    );
    let out = qkdlab(
        &["run", &clean, "--trials", "2", "--out", "clean_out"],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("clean_out");
    let events = fs::read_to_string(dir.join("events.csv")).unwrap();
    assert_eq!(
        events.lines().next(),
        Some("slot,alice_bit,alice_basis,bob_basis,outcome,timestamp")
    );
    assert_eq!(events.lines().count(), 3001);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["provenance"]["trials"], 2);
    assert_eq!(summary["sessions"].as_array().unwrap().len(), 2);
    assert!(!dir.join("eve_log.csv").exists());

    let eve = write_scenario(
        tmp.path(),
        "eve",
        "seed = 4\nnum_pulses = 3000\n[strategy]\nkind = \"intercept_resend\"\n",
    );
    let out = qkdlab(&["run", &eve, "--out", "eve_out"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let log = fs::read_to_string(tmp.path().join("eve_out/eve_log.csv")).unwrap();
    assert!(log.starts_with("slot,measured_basis,guessed_bit,action,"));
}

#[test]
fn seed_override_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write_scenario(tmp.path(), "s", "seed = 1\nnum_pulses = 2000\n");
    for out in ["a", "b", "c"] {
        let seed = if out == "c" { "8" } else { "7" };
        assert!(
            qkdlab(&["run", &s, "--seed", seed, "--out", out], tmp.path())
                .status
                .success()
        );
    }
    let read = |d: &str| fs::read(tmp.path().join(d).join("summary.json")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    let events = |d: &str| fs::read(tmp.path().join(d).join("events.csv")).unwrap();
    assert_eq!(events("a"), events("b"));
}

#[test]
fn bad_input_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let typo = write_scenario(
        tmp.path(),
        "typo",
        "seed = 1\nnum_pulses = 10\nnum_pulse = 3\n",
    );
    let out = qkdlab(&["run", &typo], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let bad = write_scenario(
        tmp.path(),
        "bad",
        "seed = 1\nnum_pulses = 10\n[detectors.d0]\ndead_time = -1.0\n",
    );
    let out = qkdlab(&["run", &bad], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("detectors.d0.dead_time"));
    assert_eq!(
        qkdlab(&["run", "not_a_scenario"], tmp.path()).status.code(),
        Some(2)
    );
    let s = write_scenario(tmp.path(), "s", "seed = 1\nnum_pulses = 10\n");
    assert_eq!(
        qkdlab(
            &["sweep", &s, "--param", "channel.nope", "--values", "0.1"],
            tmp.path()
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn sweep_writes_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write_scenario(
        tmp.path(),
        "fs",
        "seed = 3\nnum_pulses = 4000\n[schedule]\ngate_offset_d1 = 0.0\n[strategy]\nkind = \"faked_states_dem\"\nstrict = false\n",
    );
    let out = qkdlab(
        &[
            "sweep",
            &s,
            "--param",
            "schedule.gate_offset_d1",
            "--values",
            "0,0.5,1.0",
            "--out",
            "sw",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(tmp.path().join("sw/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "value,mean_qber,mean_eve_known_fraction,mean_timing_info_bits,mean_detection_rate,abort_fraction");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0.000000,"));
    let qber: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(qber.windows(2).all(|w| w[1] <= w[0]), "{qber:?}");
}

#[test]
fn calibrate_and_analyze_timing() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write_scenario(
        tmp.path(),
        "cal",
        "seed = 2\nnum_pulses = 10\n[calibration]\nnum_pulses_per_step = 50\n",
    );
    let out = qkdlab(
        &["calibrate", &s, "--spoof", "0.4", "--out", "cal"],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("cal/calibration.json")).unwrap())
            .unwrap();
    let diff = result["offset_d1"].as_f64().unwrap() - result["offset_d0"].as_f64().unwrap();
    assert!((diff - 0.4).abs() <= 0.05 + 1e-9, "{diff}");
    let profile = fs::read_to_string(tmp.path().join("cal/scan_profile.csv")).unwrap();
    assert_eq!(profile.lines().next(), Some("offset,counts_d0,counts_d1"));
    assert_eq!(profile.lines().count(), 82);

    assert!(
        qkdlab(&["run", "sidechannel_0p5ns", "--out", "sc"], tmp.path())
            .status
            .success()
    );
    let out = qkdlab(
        &["analyze-timing", "sc/events.csv", "--truncate", "1.0"],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(tmp.path().join("sc/timing_report.json")).unwrap(),
    )
    .unwrap();
    let full = report["info_bits"].as_f64().unwrap();
    let truncated = report["truncated_info_bits"].as_f64().unwrap();
    assert!(full >= 0.25 && truncated < full, "{full} {truncated}");
    let hist = fs::read_to_string(tmp.path().join("sc/histograms.csv")).unwrap();
    assert_eq!(
        hist.lines().next(),
        Some("basis,detector,bin_lo,bin_hi,count")
    );
}

#[test]
fn reproduce_tables_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qkdlab(&["reproduce-tables"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("error slots [5, 8, 11]"));
    assert!(text.contains("key 11010010"));
}
