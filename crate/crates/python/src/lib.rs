//! Python bindings for `balanced-is`.
//!
//! Structured results come back as plain dicts and lists.

use std::path::PathBuf;

use balanced_is::harness::{self, ExperimentConfig};
use balanced_is::problems::{self, Family};
use balanced_is::saw::{self, TrapPolicy};
use balanced_is::{
    BalancingParams, CvConfig, GuaranteeInputs, PhiVariant, Sample, ScanMode, ThresholdLadder,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: balanced_is::Error) -> PyErr {
    match e {
        balanced_is::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn sample(values: Vec<f64>) -> PyResult<Sample> {
    Sample::new(values).map_err(err)
}

fn ladder(levels: Vec<f64>) -> PyResult<ThresholdLadder> {
    ThresholdLadder::new(levels).map_err(err)
}

fn phi(name: &str) -> PyResult<PhiVariant> {
    match name {
        "average" | "avg" => Ok(PhiVariant::Average),
        "max" => Ok(PhiVariant::Max),
        _ => Err(PyValueError::new_err(format!("unknown phi variant {name:?}"))),
    }
}

fn scan(name: &str) -> PyResult<ScanMode> {
    match name {
        "full" => Ok(ScanMode::Full),
        "linear" => Ok(ScanMode::Linear),
        _ => Err(PyValueError::new_err(format!("unknown scan mode {name:?}"))),
    }
}

fn policy(name: &str) -> PyResult<TrapPolicy> {
    name.parse().map_err(err)
}

#[pyfunction]
fn winsorize(y: f64, level: f64) -> PyResult<f64> {
    balanced_is::winsorize(y, level).map_err(err)
}

/// Plain importance-sampling mean.
#[pyfunction]
fn is_estimate(values: Vec<f64>) -> PyResult<f64> {
    Ok(balanced_is::is_estimate(&sample(values)?))
}

#[pyfunction]
#[pyo3(signature = (values, level, t = 2.0))]
fn winsor_summary<'py>(py: Python<'py>, values: Vec<f64>, level: f64, t: f64) -> PyResult<Bound<'py, PyAny>> {
    let s = balanced_is::winsor_summary(&sample(values)?, level, t).map_err(err)?;
    to_py(py, &s)
}

/// Balancing-principle threshold selection. Returns the full result as a dict.
#[pyfunction]
#[pyo3(signature = (values, levels, c = None, t = 2.0, phi_variant = "average", scan_mode = "full"))]
fn select_threshold<'py>(
    py: Python<'py>,
    values: Vec<f64>,
    levels: Vec<f64>,
    c: Option<f64>,
    t: f64,
    phi_variant: &str,
    scan_mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let params = BalancingParams {
        c: c.unwrap_or(BalancingParams::default().c),
        t,
        phi_variant: phi(phi_variant)?,
        scan: scan(scan_mode)?,
    };
    let r = balanced_is::select_threshold(&sample(values)?, &ladder(levels)?, &params).map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (values, levels, folds = 10, seed = 0))]
fn cv_select_threshold<'py>(
    py: Python<'py>,
    values: Vec<f64>,
    levels: Vec<f64>,
    folds: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = CvConfig { folds, shuffle_seed: seed };
    let r = balanced_is::cv_select_threshold(&sample(values)?, &ladder(levels)?, &cfg).map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (c, phi_variant = "average"))]
fn constant_c(c: f64, phi_variant: &str) -> PyResult<f64> {
    balanced_is::constant_c(c, phi(phi_variant)?).map_err(err)
}

#[pyfunction]
fn guarantee_probability(k_bound: f64, n: u64, t: f64, levels: usize) -> PyResult<f64> {
    balanced_is::guarantee_probability(&GuaranteeInputs { k_bound, n, t, levels }).map_err(err)
}

#[pyfunction]
fn k_bound_from_alpha(alpha: f64) -> PyResult<f64> {
    balanced_is::k_bound_from_alpha(alpha).map_err(err)
}

#[pyfunction]
fn std_normal_cdf(x: f64) -> PyResult<f64> {
    balanced_is::std_normal_cdf(x).map_err(err)
}

/// Importance weights for one synthetic problem, with its true mean.
#[pyfunction]
#[pyo3(signature = (family, param, n, seed = 0))]
fn draw_weights(family: &str, param: f64, n: usize, seed: u64) -> PyResult<(Vec<f64>, f64)> {
    let family: Family = family.parse().map_err(err)?;
    let problem = problems::make_problem(family, param).map_err(err)?;
    let s = problems::draw_weights(&problem, n, &mut balanced_is::rng::seeded(seed)).map_err(err)?;
    Ok((s.values().to_vec(), problem.true_theta()))
}

/// Sequential importance sampling estimate of the number of corner-to-corner
/// walks on an `m × m` grid. Returns `(summary, weights)`.
#[pyfunction]
#[pyo3(signature = (m, n, policy = "q3", seed = 0))]
fn estimate_csaw<'py>(
    py: Python<'py>,
    m: usize,
    n: usize,
    policy: &str,
    seed: u64,
) -> PyResult<(Bound<'py, PyAny>, Vec<f64>)> {
    let (est, s) = py
        .detach(|| saw::estimate_csaw_par(m, self::policy(policy)?, n, seed).map_err(err))?;
    Ok((to_py(py, &est)?, s.values().to_vec()))
}

#[pyfunction]
fn enumerate_csaw(m: usize) -> PyResult<u64> {
    saw::enumerate_csaw(m).map_err(err)
}

#[pyfunction]
fn known_csaw_count(m: usize) -> Option<u128> {
    saw::known_csaw_count(m)
}

/// Runs an experiment described by a JSON config. Returns summary.csv text;
/// all three output files are written when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir = None, threads = None))]
fn run_experiment(py: Python<'_>, config_json: &str, out_dir: Option<PathBuf>, threads: Option<usize>) -> PyResult<String> {
    let config = ExperimentConfig::from_json(config_json).map_err(err)?;
    py.detach(|| {
        let result = harness::run_experiment(&config, threads).map_err(err)?;
        if let Some(dir) = out_dir.or(config.output_dir.clone()) {
            harness::emit_outputs(&result, &dir).map_err(err)?;
        }
        Ok(harness::summary_csv(&result))
    })
}

#[pymodule]
fn balanced_is_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(winsorize, m)?)?;
    m.add_function(wrap_pyfunction!(is_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(winsor_summary, m)?)?;
    m.add_function(wrap_pyfunction!(select_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(cv_select_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(constant_c, m)?)?;
    m.add_function(wrap_pyfunction!(guarantee_probability, m)?)?;
    m.add_function(wrap_pyfunction!(k_bound_from_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(std_normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(draw_weights, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_csaw, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_csaw, m)?)?;
    m.add_function(wrap_pyfunction!(known_csaw_count, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
