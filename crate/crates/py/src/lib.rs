//! Python module `latentdrive`. Configurations and reports cross the
//! boundary as JSON strings, conformations as lists of `[x, y, z]`.

use ::latentdrive as core;
use core::config::ConfigDocument;
use core::dynamics::Conformation;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn load(config: Option<&str>, seed: Option<u64>) -> PyResult<ConfigDocument> {
    let mut cfg = match config {
        Some(text) => ConfigDocument::from_json(text).map_err(value_err)?,
        None => ConfigDocument::default(),
    };
    if let Some(s) = seed {
        cfg.workflow.seed = s;
    }
    Ok(cfg)
}

fn conformation(beads: Vec<[f64; 3]>) -> PyResult<Conformation> {
    Conformation::new(beads).map_err(value_err)
}

/// Default configuration as pretty JSON.
#[pyfunction]
fn default_config() -> String {
    ConfigDocument::default().to_json_pretty()
}

/// Runs the adaptive campaign and returns report.json text.
#[pyfunction]
#[pyo3(signature = (config=None, seed=None))]
fn run_campaign(py: Python<'_>, config: Option<&str>, seed: Option<u64>) -> PyResult<String> {
    let cfg = load(config, seed)?;
    let out = py.detach(|| core::workflow::campaign_loop(&cfg)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    core::report::report_json(&out).map_err(value_err)
}

/// Runs the non-adaptive control and returns report.json text.
#[pyfunction]
#[pyo3(signature = (config=None, seed=None))]
fn run_baseline(py: Python<'_>, config: Option<&str>, seed: Option<u64>) -> PyResult<String> {
    let cfg = load(config, seed)?;
    let out = py.detach(|| core::workflow::run_baseline(&cfg)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    core::report::report_json(&out).map_err(value_err)
}

/// Baseline over adaptive steps to first fold; ValueError when either run did not fold.
#[pyfunction]
fn gain(adaptive_report: &str, baseline_report: &str) -> PyResult<f64> {
    let a = serde_json::from_str(adaptive_report).map_err(value_err)?;
    let b = serde_json::from_str(baseline_report).map_err(value_err)?;
    core::workflow::gain(&a, &b).map_err(value_err)
}

#[pyfunction]
fn gain_ratio(baseline_steps: f64, adaptive_steps: f64) -> f64 {
    core::workflow::gain_ratio(baseline_steps, adaptive_steps)
}

/// RMSD after optimal superposition.
#[pyfunction]
fn kabsch_rmsd(a: Vec<[f64; 3]>, b: Vec<[f64; 3]>) -> PyResult<f64> {
    core::features::kabsch_rmsd(&conformation(a)?, &conformation(b)?).map_err(value_err)
}

/// Symmetric 0/1 contact matrix as nested lists.
#[pyfunction]
fn contact_matrix(beads: Vec<[f64; 3]>, cutoff: f64) -> PyResult<Vec<Vec<u8>>> {
    let m = core::features::contact_matrix(&conformation(beads)?, cutoff).map_err(value_err)?;
    let n = m.order();
    Ok((0..n).map(|i| (0..n).map(|j| m.get(i, j) as u8).collect()).collect())
}

/// Weak-scaling rows as scaling.csv text.
#[pyfunction]
#[pyo3(signature = (counts, config=None))]
fn scaling(py: Python<'_>, counts: Vec<usize>, config: Option<&str>) -> PyResult<String> {
    let cfg = load(config, None)?;
    let rows = py.detach(|| core::workflow::run_scaling(&cfg, &counts)).map_err(value_err)?;
    Ok(core::report::scaling_csv(&rows))
}

#[pymodule]
fn latentdrive(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(run_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(gain, m)?)?;
    m.add_function(wrap_pyfunction!(gain_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(kabsch_rmsd, m)?)?;
    m.add_function(wrap_pyfunction!(contact_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(scaling, m)?)?;
    Ok(())
}
