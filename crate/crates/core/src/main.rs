//! `qkdlab` command line.
//!
//! Exit codes: 0 success, 1 a session aborted (or tables mismatched),
//! 2 bad input or a failed run.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qkdlab::attacks::{
    CalibrationSpoof, CalibrationSpoofParams, EveStrategy, FakedStatesParams, StrategySpec,
};
use qkdlab::calibration::run_calibration;
use qkdlab::detector::DetectorPair;
use qkdlab::harness::output::{
    read_events, timestamp_log, to_json, write_calibration, write_histograms, write_run_outputs,
    write_sweep,
};
use qkdlab::harness::{resolve, run_scenario_detailed, run_sweep, stream, SessionConfig};
use qkdlab::protocol::mbp::reproduce_tables;
use qkdlab::sidechannel::analyze_timing;

#[derive(Parser)]
#[command(
    name = "qkdlab",
    version,
    about = "Seeded BB84 lab: detector flaws, timing attacks, calibration and side channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (built-in name or TOML path) and write events.csv and summary.json.
    Run {
        scenario: String,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        /// Overrides the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: out/<scenario name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a scenario for each value of one numeric config field; writes sweep.csv.
    Sweep {
        scenario: String,
        /// Dotted config path, e.g. schedule.gate_offset_d1.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run Bob's gate calibration only; writes calibration.json and scan_profile.csv.
    Calibrate {
        scenario: String,
        /// Let Eve spoof the sync pulses to pull the gates DELTA ns apart.
        #[arg(long, allow_negative_numbers = true)]
        spoof: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Timing side-channel analysis of an events.csv; writes histograms.csv and timing_report.json.
    AnalyzeTiming {
        event_log: PathBuf,
        /// Also score Eve after rounding timestamps to RES ns.
        #[arg(long)]
        truncate: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        bin_width: f64,
        /// Output directory (default: the event log's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay the scripted magic-ball sessions and compare them with the reference tables.
    ReproduceTables,
}

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            trials,
            seed,
            out,
        } => cmd_run(&scenario, trials, seed, out),
        Command::Sweep {
            scenario,
            param,
            values,
            trials,
            seed,
            out,
        } => cmd_sweep(&scenario, &param, &values, trials, seed, out),
        Command::Calibrate {
            scenario,
            spoof,
            seed,
            out,
        } => cmd_calibrate(&scenario, spoof, seed, out),
        Command::AnalyzeTiming {
            event_log,
            truncate,
            bin_width,
            out,
        } => cmd_analyze(&event_log, truncate, bin_width, out),
        Command::ReproduceTables => cmd_tables(),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}

fn load(scenario: &str, seed: Option<u64>) -> Result<SessionConfig, Box<dyn std::error::Error>> {
    let mut cfg = resolve(scenario)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(out: Option<PathBuf>, cfg: &SessionConfig) -> PathBuf {
    out.unwrap_or_else(|| {
        Path::new("out").join(if cfg.name.is_empty() {
            "scenario"
        } else {
            &cfg.name
        })
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into())
}

fn cmd_run(scenario: &str, trials: u64, seed: Option<u64>, out: Option<PathBuf>) -> CliResult {
    let cfg = load(scenario, seed)?;
    let (report, first) = run_scenario_detailed(&cfg, trials)?;
    let dir = out_dir(out, &cfg);
    write_run_outputs(&dir, &report, &first, cfg.strategy.kind().is_some())?;
    let a = &report.aggregate;
    println!("scenario      {}", report.scenario);
    println!("trials        {}", a.sessions);
    println!("qber          {}", fmt_opt(a.qber.map(|q| q.value)));
    println!(
        "detection     {}",
        fmt_opt(a.detection_rate.map(|d| d.value))
    );
    println!("sift fraction {:.6}", a.mean_sift_fraction);
    println!("eve known     {}", fmt_opt(a.mean_eve_known_fraction));
    println!("timing info   {}", fmt_opt(a.mean_timing_info_bits));
    println!("aborted       {}/{}", a.aborted, a.sessions);
    println!("output        {}", dir.display());
    Ok(if report.any_abort() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_sweep(
    scenario: &str,
    param: &str,
    values: &[f64],
    trials: u64,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> CliResult {
    let cfg = load(scenario, seed)?;
    let report = run_sweep(&cfg, param, values, trials)?;
    let dir = out_dir(out, &cfg);
    fs::create_dir_all(&dir)?;
    write_sweep(fs::File::create(dir.join("sweep.csv"))?, &report)?;
    fs::write(dir.join("sweep.json"), to_json(&report))?;
    let mut stdout = std::io::stdout().lock();
    write_sweep(&mut stdout, &report)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_calibrate(
    scenario: &str,
    spoof: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> CliResult {
    let cfg = load(scenario, seed)?;
    let detectors = cfg.detectors.pair();
    let cal = cfg.calibration.unwrap_or_default();
    let delta = spoof.or(match &cfg.strategy {
        StrategySpec::CalibrationSpoof(p) => Some(p.delta),
        _ => None,
    });
    let mut eve = match delta {
        Some(delta) => {
            let params = CalibrationSpoofParams {
                delta,
                faked_states: FakedStatesParams::default(),
            };
            Some(CalibrationSpoof::new(params, &detectors, &cfg.schedule)?)
        }
        None => None,
    };
    let pair = DetectorPair::new(detectors, cfg.schedule);
    let mut rng = stream(cfg.seed, 0, "calibration");
    let result = run_calibration(
        &cal,
        &pair,
        eve.as_mut().map(|e| e as &mut dyn EveStrategy),
        &mut rng,
    )?;
    let dir = out_dir(out, &cfg);
    write_calibration(&dir, &result)?;
    println!("offset_d0     {:.6}", result.offset_d0);
    println!("offset_d1     {:.6}", result.offset_d1);
    println!("difference    {:.6}", result.offset_d1 - result.offset_d0);
    println!("output        {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(
    event_log: &Path,
    truncate: Option<f64>,
    bin_width: f64,
    out: Option<PathBuf>,
) -> CliResult {
    let rows = read_events(fs::File::open(event_log)?)?;
    let log = timestamp_log(&rows);
    let (report, hists) = analyze_timing(&log, bin_width, truncate)?;
    let dir = out.unwrap_or_else(|| {
        event_log
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    });
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir)?;
    }
    write_histograms(fs::File::create(dir.join("histograms.csv"))?, &hists)?;
    fs::write(dir.join("timing_report.json"), to_json(&report))?;
    println!("events        {}", report.events);
    for b in &report.bases {
        println!(
            "basis {}       separation {:.6} ns  sigma {:.6} ns  accuracy {:.6}  held-out {:.6}",
            b.basis,
            b.fit.separation(),
            b.fit.sigma,
            b.model.accuracy,
            b.empirical_accuracy
        );
    }
    println!("info bits     {}", fmt_opt(report.info_bits));
    if truncate.is_some() {
        println!("truncated     {}", fmt_opt(report.truncated_info_bits));
    }
    println!("measure       {}", report.measure);
    Ok(ExitCode::SUCCESS)
}

fn cmd_tables() -> CliResult {
    let report = reproduce_tables()?;
    print!("{}", report.text);
    if report.is_exact() {
        Ok(ExitCode::SUCCESS)
    } else {
        for m in &report.mismatches {
            println!("MISMATCH {m}");
        }
        Ok(ExitCode::from(1))
    }
}
