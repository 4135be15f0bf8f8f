//! Python bindings. Results come back as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use sqp_core::scenario::{
    builtin_names, builtin_source, heading_table_deg, replay, resolve_scenario, run_scenario,
    RolloutSummary, RunError, RunSummary, ScenarioConfig, UtopiaSummary,
};
use sqp_core::sqp::compute_utopia;
use sqp_core::swarm::WeightMatrix;

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn load(
    scenario: &str,
    overrides: Option<Vec<String>>,
    seed: Option<u64>,
) -> PyResult<ScenarioConfig> {
    let mut ov = overrides.unwrap_or_default();
    if let Some(s) = seed {
        ov.push(format!("solver.rng_seed={s}"));
    }
    resolve_scenario(scenario, &ov).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Names of the built-in scenarios.
#[pyfunction]
fn scenarios() -> Vec<&'static str> {
    builtin_names().collect()
}

/// TOML text of a built-in scenario.
#[pyfunction]
fn scenario_toml(name: &str) -> PyResult<&'static str> {
    builtin_source(name)
        .ok_or_else(|| PyValueError::new_err(format!("no built-in scenario `{name}`")))
}

/// Resolved scenario configuration as a dict.
#[pyfunction]
#[pyo3(signature = (scenario, overrides=None))]
fn load_scenario<'py>(
    py: Python<'py>,
    scenario: &str,
    overrides: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &load(scenario, overrides, None)?)
}

/// Runs the full optimization and returns the run summary. An infeasible
/// result is still returned, with `feasible` false.
#[pyfunction]
#[pyo3(signature = (scenario, overrides=None, seed=None))]
fn optimize<'py>(
    py: Python<'py>,
    scenario: &str,
    overrides: Option<Vec<String>>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = load(scenario, overrides, seed)?;
    let bundle = match py.detach(|| run_scenario(&cfg)) {
        Ok(b) => b,
        Err(RunError::Infeasible(b)) => *b,
        Err(RunError::Scenario(e)) => return Err(PyValueError::new_err(e.to_string())),
        Err(e) => return Err(PyRuntimeError::new_err(e.to_string())),
    };
    let out = to_py(py, &RunSummary::from_bundle(&bundle))?;
    out.set_item("headings_deg", heading_table_deg(&bundle.trajectory))?;
    let path: Vec<Vec<[f64; 2]>> = bundle
        .trajectory
        .states
        .iter()
        .map(|s| s.positions.clone())
        .collect();
    out.set_item("positions", path)?;
    Ok(out)
}

/// Rolls out cooperative weight rows with leader headings in degrees.
#[pyfunction]
#[pyo3(signature = (scenario, weights, leader_headings_deg, overrides=None))]
fn rollout<'py>(
    py: Python<'py>,
    scenario: &str,
    weights: Vec<Vec<f64>>,
    leader_headings_deg: Vec<f64>,
    overrides: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = load(scenario, overrides, None)?;
    let m = cfg.agents();
    if weights.len() != m - 1 || weights.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err(format!(
            "weights must be {} rows of {m} entries",
            m - 1
        )));
    }
    WeightMatrix::with_lower_bound(weights.clone(), 0.0, cfg.tol_eq)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    if leader_headings_deg.iter().any(|h| !h.is_finite()) {
        return Err(PyValueError::new_err("headings must be finite"));
    }
    let traj = replay(&cfg, &weights, &leader_headings_deg);
    let out = to_py(py, &RolloutSummary::new(&cfg, &weights, &traj))?;
    out.set_item("headings_deg", heading_table_deg(&traj))?;
    let path: Vec<Vec<[f64; 2]>> = traj.states.iter().map(|s| s.positions.clone()).collect();
    out.set_item("positions", path)?;
    Ok(out)
}

/// Single-objective utopia values.
#[pyfunction]
#[pyo3(signature = (scenario, overrides=None, seed=None))]
fn utopia<'py>(
    py: Python<'py>,
    scenario: &str,
    overrides: Option<Vec<String>>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = load(scenario, overrides, seed)?;
    let report = py
        .detach(|| compute_utopia(&cfg, &cfg.solver))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &UtopiaSummary::new(&cfg, &report))
}

#[pymodule(name = "swarm_sqp")]
fn python_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_toml, m)?)?;
    m.add_function(wrap_pyfunction!(load_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(rollout, m)?)?;
    m.add_function(wrap_pyfunction!(utopia, m)?)?;
    Ok(())
}
