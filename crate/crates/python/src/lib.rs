//! Python bindings. Reports come back as plain dicts (parsed from the same
//! JSON the CLI writes), so results are identical across both front ends.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qkdlab::harness::{self, SessionConfig};
use qkdlab::optics::{detection_probabilities as probs, Basis, Polarization};
use qkdlab::sidechannel::{model_accuracy, rounded_accuracy, GaussianFit};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, json: String) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (json,))?.unbind())
}

fn load(scenario: &str, seed: Option<u64>) -> PyResult<SessionConfig> {
    let mut cfg = harness::resolve(scenario).map_err(value_error)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Names of the built-in scenarios.
#[pyfunction]
fn builtin_scenarios() -> Vec<&'static str> {
    harness::builtin_names().collect()
}

/// TOML text of a built-in scenario, as a starting point for custom files.
#[pyfunction]
fn scenario_toml(name: &str) -> PyResult<String> {
    harness::builtin(name)
        .map_err(value_error)?
        .to_toml()
        .map_err(value_error)
}

/// Runs a scenario (built-in name or TOML path) and returns the report dict.
#[pyfunction]
#[pyo3(signature = (scenario, trials = 1, seed = None))]
fn run(py: Python<'_>, scenario: &str, trials: u64, seed: Option<u64>) -> PyResult<Py<PyAny>> {
    let cfg = load(scenario, seed)?;
    let report = py
        .detach(|| harness::run_scenario(&cfg, trials))
        .map_err(value_error)?;
    to_py(py, report.to_json())
}

/// Same as `run` but from TOML text.
#[pyfunction]
#[pyo3(signature = (text, trials = 1, seed = None))]
fn run_toml(py: Python<'_>, text: &str, trials: u64, seed: Option<u64>) -> PyResult<Py<PyAny>> {
    let mut cfg = harness::parse_config(text).map_err(value_error)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = py
        .detach(|| harness::run_scenario(&cfg, trials))
        .map_err(value_error)?;
    to_py(py, report.to_json())
}

/// Re-runs a scenario for each value of the numeric field at `param`.
#[pyfunction]
#[pyo3(signature = (scenario, param, values, trials = 1, seed = None))]
fn sweep(
    py: Python<'_>,
    scenario: &str,
    param: &str,
    values: Vec<f64>,
    trials: u64,
    seed: Option<u64>,
) -> PyResult<Py<PyAny>> {
    let cfg = load(scenario, seed)?;
    let report = py
        .detach(|| harness::run_sweep(&cfg, param, &values, trials))
        .map_err(value_error)?;
    to_py(py, harness::output::to_json(&report))
}

/// `(text, exact)` for the scripted magic-ball tables.
#[pyfunction]
fn reproduce_tables() -> PyResult<(String, bool)> {
    let report = qkdlab::protocol::mbp::reproduce_tables().map_err(value_error)?;
    Ok((report.text.clone(), report.is_exact()))
}

/// `(pD0, pD1)` for linear polarization `angle` (degrees) measured in basis "Z" or "X".
#[pyfunction]
fn detection_probabilities(angle: f64, basis: &str) -> PyResult<(f64, f64)> {
    let basis = Basis::parse(basis)
        .ok_or_else(|| value_error(format!("basis must be Z or X, got {basis:?}")))?;
    Ok(probs(Polarization::from_degrees(angle), basis))
}

/// Bits Eve learns per sifted bit from timestamps with centroid separation
/// `separation` and jitter `sigma`, revealed at `resolution` (0 = exact).
#[pyfunction]
#[pyo3(signature = (separation, sigma, resolution = 0.0))]
fn timing_information(separation: f64, sigma: f64, resolution: f64) -> PyResult<f64> {
    if !(sigma >= 0.0 && resolution >= 0.0) {
        return Err(value_error("sigma and resolution must be >= 0"));
    }
    let fit = GaussianFit {
        mean: [0.0, separation],
        sigma,
        n: [1, 1],
    };
    Ok(if resolution > 0.0 {
        rounded_accuracy(&fit, resolution)
    } else {
        model_accuracy(&fit)
    }
    .info_bits)
}

#[pymodule]
fn pyqkdlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(builtin_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_toml, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_toml, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce_tables, m)?)?;
    m.add_function(wrap_pyfunction!(detection_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(timing_information, m)?)?;
    Ok(())
}
