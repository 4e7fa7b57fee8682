//! Python bindings. Matrices cross the boundary as nested lists
//! `[row][col][component]` with four quaternion components per entry.

use hua_lab::cli::{run, JobSpec};
use hua_lab::closedform::{group_integral_rhs, group_integral_theta_rhs, ExponentSpec};
use hua_lab::matlin::{GroupElement, KMatrix};
use hua_lab::montecarlo::{group_integral_mc as mc, theta_integral_mc};
use hua_lab::upsilon::{cube_coordinates as cube, upsilon as ups};
use hua_lab::{haar_unitary as haar, AlgebraTag, Group, RngStream, Scalar};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: hua_lab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn group_of(s: &str) -> PyResult<Group> {
    Group::parse(s).map_err(py_err)
}

fn to_nested(m: &KMatrix) -> Vec<Vec<[f64; 4]>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m.get(i, j).c).collect()).collect()
}

fn from_nested(alg: AlgebraTag, rows: &[Vec<[f64; 4]>]) -> PyResult<KMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let data = rows.iter().flatten().map(|&c| Scalar { c }).collect();
    KMatrix::from_vec(alg, n, n, data).map_err(py_err)
}

fn spec(group: Group, lambda: Vec<Complex64>, mu: Option<Vec<Complex64>>, theta: Option<Vec<f64>>) -> PyResult<ExponentSpec> {
    let s = ExponentSpec { algebra: group.algebra(), lambda, mu, theta };
    s.validate().map_err(py_err)?;
    Ok(s)
}

/// Package name and version baked into every report.
#[pyfunction]
fn build_id() -> &'static str {
    hua_lab::BUILD_ID
}

/// Runs a JobSpec given as JSON; returns `(exit_code, report_json, diagnostics)`.
#[pyfunction]
fn run_job(job_json: &str) -> PyResult<(i32, String, String)> {
    let job = JobSpec::from_json(job_json).map_err(py_err)?;
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(&job, &mut out, &mut err);
    Ok((code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned()))
}

/// A Haar-random element of SO(n), U(n) or Sp(n).
#[pyfunction]
#[pyo3(signature = (group, n, seed, stream_id = 0))]
fn haar_unitary(group: &str, n: usize, seed: u64, stream_id: u64) -> PyResult<Vec<Vec<[f64; 4]>>> {
    let mut rng = RngStream::new(seed, stream_id);
    let g = haar(group_of(group)?, n, &mut rng).map_err(py_err)?;
    Ok(to_nested(g.matrix()))
}

/// `Υ^m(g) = T - R(1+P)⁻¹Q` for a group element given as nested lists.
#[pyfunction]
fn upsilon(group: &str, matrix: Vec<Vec<[f64; 4]>>, m: usize) -> PyResult<Vec<Vec<[f64; 4]>>> {
    let group = group_of(group)?;
    let g = GroupElement::new(from_nested(group.algebra(), &matrix)?, group).map_err(py_err)?;
    Ok(to_nested(ups(&g, m).map_err(py_err)?.matrix()))
}

/// Cube coordinates `x_2..x_n` (four components each).
#[pyfunction]
fn cube_coordinates(group: &str, matrix: Vec<Vec<[f64; 4]>>) -> PyResult<Vec<[f64; 4]>> {
    let group = group_of(group)?;
    let g = GroupElement::new(from_nested(group.algebra(), &matrix)?, group).map_err(py_err)?;
    Ok(cube(&g).map_err(py_err)?.coords.iter().map(|s| s.c).collect())
}

/// Closed form of the Haar integral; with `theta`, the θ-weighted variant.
#[pyfunction]
#[pyo3(signature = (group, lambda_, mu = None, theta = None))]
fn group_integral(group: &str, lambda_: Vec<Complex64>, mu: Option<Vec<Complex64>>, theta: Option<Vec<f64>>) -> PyResult<Complex64> {
    let theta_given = theta.is_some();
    let s = spec(group_of(group)?, lambda_, mu, theta)?;
    let v = if theta_given { group_integral_theta_rhs(&s) } else { group_integral_rhs(&s) };
    Ok(v.map_err(py_err)?.to_complex())
}

/// Monte Carlo estimate of the same integral: a dict with `mean`,
/// `stderr`, `samples` and `discarded`.
#[pyfunction]
#[pyo3(signature = (group, lambda_, mu = None, theta = None, samples = 100_000, shards = 16, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn group_integral_mc<'py>(
    py: Python<'py>,
    group: &str,
    lambda_: Vec<Complex64>,
    mu: Option<Vec<Complex64>>,
    theta: Option<Vec<f64>>,
    samples: u64,
    shards: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let theta_given = theta.is_some();
    let s = spec(group_of(group)?, lambda_, mu, theta)?;
    let est = py
        .detach(|| if theta_given { theta_integral_mc(&s, samples, shards, seed) } else { mc(&s, samples, shards, seed) })
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("mean", est.mean)?;
    d.set_item("stderr", est.stderr())?;
    d.set_item("samples", est.samples)?;
    d.set_item("discarded", est.discarded)?;
    Ok(d)
}

#[pymodule]
fn hua_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(build_id, m)?)?;
    m.add_function(wrap_pyfunction!(run_job, m)?)?;
    m.add_function(wrap_pyfunction!(haar_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(upsilon, m)?)?;
    m.add_function(wrap_pyfunction!(cube_coordinates, m)?)?;
    m.add_function(wrap_pyfunction!(group_integral, m)?)?;
    m.add_function(wrap_pyfunction!(group_integral_mc, m)?)?;
    Ok(())
}
