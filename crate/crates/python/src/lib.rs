//! Python bindings: run configurations, inspect traces, verify run directories.

use std::path::PathBuf;

use cohevo::artifacts::{execute, RunOutcome};
use cohevo::config::{RunConfig, TimeSpec};
use cohevo::harness::{convergence_study, oracle_compare, shipped_scenarios, Oracle, StudySpec};
use cohevo::materials::cohesive;
use cohevo::verify::verify_run;
use cohevo::{CohesiveLaw, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Parameter { .. }
        | Error::Config(_)
        | Error::Dimension { .. }
        | Error::Mesh(_)
        | Error::TimeOutOfRange { .. }
        | Error::Scenario(_)
        | Error::Initial(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_law(law_json: &str) -> PyResult<CohesiveLaw> {
    let law: CohesiveLaw = serde_json::from_str(law_json).map_err(json_err)?;
    law.validate().map_err(py_err)?;
    Ok(law)
}

/// A validated run configuration.
#[pyclass(name = "RunConfig", module = "cohevo_py")]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = RunConfig::from_json(text).map_err(py_err)?;
        inner.scenario().map_err(py_err)?;
        Ok(PyRunConfig { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = RunConfig::load(&path).map_err(py_err)?;
        inner.scenario().map_err(py_err)?;
        Ok(PyRunConfig { inner })
    }

    /// One of the scenarios shipped with the solver, by name.
    #[staticmethod]
    fn shipped(name: &str) -> PyResult<Self> {
        shipped_scenarios()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, inner)| PyRunConfig { inner })
            .ok_or_else(|| PyValueError::new_err(format!("no shipped scenario named {name:?}")))
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Replace the time grid by `steps` uniform steps.
    fn with_steps(&self, steps: usize) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        inner.time = TimeSpec::Uniform { steps };
        inner.scenario().map_err(py_err)?;
        Ok(PyRunConfig { inner })
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.loads.horizon
    }

    fn run(&self, py: Python<'_>) -> PyResult<PyRun> {
        let cfg = self.inner.clone();
        let outcome = py.detach(move || execute(&cfg)).map_err(py_err)?;
        Ok(PyRun { outcome })
    }

    fn __repr__(&self) -> String {
        format!("RunConfig(horizon={}, law={:?})", self.inner.loads.horizon, self.inner.law)
    }
}

/// A finished evolution with its checks.
#[pyclass(name = "Run", module = "cohevo_py")]
struct PyRun {
    outcome: RunOutcome,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.outcome.trace.times()
    }

    #[getter]
    fn u(&self) -> Vec<Vec<f64>> {
        self.outcome.trace.u.clone()
    }

    #[getter]
    fn gamma(&self) -> Vec<Vec<f64>> {
        self.outcome.trace.gamma.clone()
    }

    #[getter]
    fn total_energy(&self) -> Vec<f64> {
        self.outcome.trace.records.iter().map(|r| r.energy.total).collect()
    }

    #[getter]
    fn balance_residual(&self) -> Vec<f64> {
        self.outcome.trace.records.iter().map(|r| r.balance_residual).collect()
    }

    #[getter]
    fn dissipation(&self) -> Vec<f64> {
        self.outcome.trace.records.iter().map(|r| r.cumulative_dissipation).collect()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.outcome.trace.require_converged().is_ok()
    }

    /// Interface jumps at knot `i`.
    fn jump(&self, i: usize) -> PyResult<Vec<[f64; 2]>> {
        let u = self
            .outcome
            .trace
            .u
            .get(i)
            .ok_or_else(|| PyValueError::new_err(format!("knot {i} out of range")))?;
        cohevo::jump(&self.outcome.scenario.problem.mesh, u).map_err(py_err)
    }

    /// Run summary (status, balance, stability, bounds) as JSON.
    fn report_json(&self) -> String {
        serde_json::to_string(&self.outcome.report).expect("report serializes")
    }

    fn euler_json(&self) -> String {
        serde_json::to_string(&self.outcome.euler).expect("euler reports serialize")
    }

    /// Maximum (sigma, delta, gamma) errors against a rod oracle: "linear" or "griffith".
    fn oracle_errors(&self, kind: &str) -> PyResult<(f64, f64, f64)> {
        let oracle = match kind {
            "linear" => Oracle::Analytic1dLinear,
            "griffith" => Oracle::Analytic1dGriffith,
            _ => return Err(PyValueError::new_err(format!("unknown oracle {kind:?}"))),
        };
        let e = oracle_compare(&self.outcome.scenario.problem, &self.outcome.trace, oracle).map_err(py_err)?;
        Ok((e.sigma, e.delta, e.gamma))
    }

    /// Write the run artifacts to `dir`.
    fn write(&self, dir: PathBuf) -> PyResult<()> {
        self.outcome.write(&dir).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.outcome.trace.records.len()
    }
}

/// Cohesive density of `law` (JSON, e.g. {"type": "linear", "b": 1.0}) at a jump.
#[pyfunction]
fn phi(law_json: &str, y: Vec<f64>) -> PyResult<f64> {
    Ok(cohesive::phi(&parse_law(law_json)?, &y))
}

/// argmin_y 0.5 c |y - y0|^2 + w (phi(y) - gamma)^+.
#[pyfunction]
fn prox_increment(law_json: &str, y0: Vec<f64>, gamma: f64, c: f64, w: f64) -> PyResult<Vec<f64>> {
    cohesive::prox_increment(&parse_law(law_json)?, &y0, gamma, c, w).map_err(py_err)
}

/// Invariant checks of a run directory: (passed, checks as JSON).
#[pyfunction]
fn verify(py: Python<'_>, dir: PathBuf) -> PyResult<(bool, String)> {
    let report = py.detach(move || verify_run(&dir)).map_err(py_err)?;
    Ok((report.passed(), serde_json::to_string(&report.checks).expect("checks serialize")))
}

/// Time-refinement study from a JSON spec; returns the result as JSON.
#[pyfunction]
fn study(py: Python<'_>, spec_json: &str) -> PyResult<String> {
    let spec = StudySpec::from_json(spec_json).map_err(py_err)?;
    let result = py.detach(move || convergence_study(&spec)).map_err(py_err)?;
    Ok(serde_json::to_string(&result).expect("study serializes"))
}

#[pyfunction]
fn shipped_names() -> Vec<&'static str> {
    shipped_scenarios().into_iter().map(|(n, _)| n).collect()
}

#[pymodule]
fn cohevo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(prox_increment, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(study, m)?)?;
    m.add_function(wrap_pyfunction!(shipped_names, m)?)?;
    Ok(())
}
