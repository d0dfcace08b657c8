//! Python bindings.

use std::collections::BTreeMap;
use std::path::PathBuf;

use paramop_cli::config::{problem_names, RunConfig};
use paramop_cli::{parse_config, run_sweep, serialize_config, write_outputs};
use paramop_core::families::{registry_build, Family, ParamValue, Params, RhsFamily, DEFAULT_H_SEQUENCE};
use paramop_core::fredholm::{fredholm_sensitivity, kernel_build, SourceFamily};
use paramop_core::linear::{continuity_modulus, solve_at};
use paramop_core::nonlinear::{newton_solve, nonlinear_continuity, NewtonOptions};
use paramop_core::quadrature::gauss_legendre as gl;
use paramop_core::verdict::VerdictOptions;
use paramop_core::{Matrix, Vector, C64};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[derive(FromPyObject)]
enum ParamArg {
    Number(f64),
    List(Vec<f64>),
    Text(String),
}

fn to_params(raw: Option<BTreeMap<String, ParamArg>>) -> Params {
    let mut p = Params::new();
    for (key, v) in raw.unwrap_or_default() {
        let value = match v {
            ParamArg::Number(x) => ParamValue::Number(x),
            ParamArg::List(xs) => ParamValue::List(xs),
            ParamArg::Text(s) => ParamValue::Text(s),
        };
        p = p.with(&key, value);
    }
    p
}

fn matrix(rows: Vec<Vec<C64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(err)
}

fn rhs_for(family: &Family, f: Option<Vec<C64>>) -> PyResult<RhsFamily> {
    let f = f.unwrap_or_else(|| vec![C64::new(1.0, 0.0); family.dim()]);
    if f.len() != family.dim() {
        return Err(err(format!("rhs has length {}, family has dimension {}", f.len(), family.dim())));
    }
    Ok(RhsFamily::constant(Vector::new(f)))
}

/// Spectral norm of a square complex matrix given as rows.
#[pyfunction]
fn operator_norm(rows: Vec<Vec<C64>>) -> PyResult<f64> {
    paramop_core::linalg::operator_norm(&matrix(rows)?).map_err(err)
}

/// Solve `A x = b` with partial pivoting.
#[pyfunction]
fn solve_dense(rows: Vec<Vec<C64>>, b: Vec<C64>) -> PyResult<Vec<C64>> {
    let x = paramop_core::linalg::solve_dense(&matrix(rows)?, &Vector::new(b)).map_err(err)?;
    Ok(x.into_inner())
}

/// Gauss-Legendre nodes and weights on `[lo, hi]`.
#[pyfunction]
#[pyo3(signature = (n, lo = 0.0, hi = 1.0))]
fn gauss_legendre(n: usize, lo: f64, hi: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let q = gl(n, lo, hi).map_err(err)?;
    Ok((q.nodes, q.weights))
}

/// Yukawa majorant bound `(1 - (1 + k a) e^{-k a}) / k^2`.
#[pyfunction]
fn m_bound(k: f64, a: f64) -> PyResult<f64> {
    paramop_core::semilinear::m_bound(k, a).map_err(err)
}

/// `(steps, jumps, converged)` for the discontinuous counterexample driven by `g`.
#[pyfunction]
fn remark12_counterexample(g: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, bool)> {
    let ce = paramop_core::linear::remark12_counterexample(&Vector::from_real(&g)).map_err(err)?;
    let (hs, jumps) = ce.jumps.iter().copied().unzip();
    Ok((hs, jumps, ce.sweep.converged()))
}

#[pyfunction]
fn list_problems() -> Vec<String> {
    problem_names()
}

/// Solve a registry family at `k`; nonlinear families use Newton from zero.
#[pyfunction]
#[pyo3(signature = (name, k, params = None, f = None))]
fn solve(name: &str, k: C64, params: Option<BTreeMap<String, ParamArg>>, f: Option<Vec<C64>>) -> PyResult<Vec<C64>> {
    let family = registry_build(name, &to_params(params)).map_err(err)?;
    let rhs = rhs_for(&family, f)?;
    let u = match &family {
        Family::Linear(fam) => solve_at(fam, &rhs, k).map_err(err)?,
        Family::Nonlinear(nf) => {
            newton_solve(nf, &rhs, k, &Vector::zeros(nf.dim), &NewtonOptions::default()).map_err(err)?.u
        }
    };
    Ok(u.into_inner())
}

/// Continuity modulus at `k`: `(steps, omegas, converged)`.
#[pyfunction]
#[pyo3(signature = (name, k, params = None, f = None, h_sequence = None))]
fn continuity(
    name: &str,
    k: C64,
    params: Option<BTreeMap<String, ParamArg>>,
    f: Option<Vec<C64>>,
    h_sequence: Option<Vec<f64>>,
) -> PyResult<(Vec<f64>, Vec<f64>, bool)> {
    let family = registry_build(name, &to_params(params)).map_err(err)?;
    let rhs = rhs_for(&family, f)?;
    let hs = h_sequence.unwrap_or_else(|| DEFAULT_H_SEQUENCE.to_vec());
    let opts = VerdictOptions::default();
    let sweep = match &family {
        Family::Linear(fam) => continuity_modulus(fam, &rhs, k, &hs, &opts).map_err(err)?,
        Family::Nonlinear(nf) => {
            nonlinear_continuity(nf, &rhs, k, &hs, &NewtonOptions::default(), &opts).map_err(err)?.sweep
        }
    };
    let (steps, omegas) = sweep.records.iter().map(|r| (r.h, r.omega)).unzip();
    Ok((steps, omegas, sweep.converged()))
}

/// Nyström solve with source `f = x`: `(nodes, u, udot)`.
#[pyfunction]
#[pyo3(signature = (kernel, k, nodes = 16))]
fn fredholm_solve(kernel: &str, k: C64, nodes: usize) -> PyResult<(Vec<f64>, Vec<C64>, Vec<C64>)> {
    let kf = kernel_build(kernel, &Params::new()).map_err(err)?;
    let q = gl(nodes, kf.lo, kf.hi).map_err(err)?;
    let src = SourceFamily::linear();
    let u = paramop_core::fredholm::fredholm_solve(&kf, &src, &q, k).map_err(err)?;
    let udot = fredholm_sensitivity(&kf, &src, &q, k).map_err(err)?;
    Ok((q.nodes, u.into_inner(), udot.into_inner()))
}

/// Newton solve of `u + k u^3 = f` componentwise.
#[pyfunction]
fn cubic_newton(f: Vec<f64>, k: C64) -> PyResult<Vec<C64>> {
    let nf = paramop_core::families::cubic_pointwise(f.len());
    let rhs = RhsFamily::constant(Vector::from_real(&f));
    let out = newton_solve(&nf, &rhs, k, &Vector::zeros(f.len()), &NewtonOptions::default()).map_err(err)?;
    Ok(out.u.into_inner())
}

/// Validated run configuration.
#[pyclass(name = "RunConfig", frozen)]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyRunConfig { inner: parse_config(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        serialize_config(&self.inner)
    }

    #[getter]
    fn problem(&self) -> String {
        self.inner.problem.name.clone()
    }

    #[getter]
    fn tasks(&self) -> Vec<&'static str> {
        self.inner.tasks.iter().map(|t| t.name()).collect()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Run every task and write outputs into `output_dir`; returns `(exit_code, report)`.
    fn run(&self, output_dir: PathBuf) -> PyResult<(i32, String)> {
        let res = run_sweep(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let report = write_outputs(&res, &output_dir).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok((res.exit_code(), report))
    }

    fn __repr__(&self) -> String {
        format!("RunConfig(problem={:?}, tasks={:?})", self.inner.problem.name, self.tasks())
    }
}

/// Parse a JSON config, run it and write outputs; returns `(exit_code, report)`.
#[pyfunction]
fn run_config(text: &str, output_dir: PathBuf) -> PyResult<(i32, String)> {
    PyRunConfig::from_json(text)?.run(output_dir)
}

#[pymodule]
fn paramop(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(operator_norm, m)?)?;
    m.add_function(wrap_pyfunction!(solve_dense, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_legendre, m)?)?;
    m.add_function(wrap_pyfunction!(m_bound, m)?)?;
    m.add_function(wrap_pyfunction!(remark12_counterexample, m)?)?;
    m.add_function(wrap_pyfunction!(list_problems, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(continuity, m)?)?;
    m.add_function(wrap_pyfunction!(fredholm_solve, m)?)?;
    m.add_function(wrap_pyfunction!(cubic_newton, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_class::<PyRunConfig>()?;
    Ok(())
}
