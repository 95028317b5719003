//! Python bindings for the `dampwave` toolkit.

use std::collections::BTreeMap;
use std::path::PathBuf;

use dampwave::decay::{cross_check_alpha, worst_case_ensemble};
use dampwave::fit::logspace;
use dampwave::grid::{sample_real, wrap, GridFunction, PeriodicGrid};
use dampwave::linalg::start_vector;
use dampwave::resolvent::{
    self, damping_identity_check, fit_resolvent_exponent, low_energy_certificate, solve_problem, BetaStrategy,
    GridRule, StationaryProblem,
};
use dampwave::sweep::{self, RunOptions};
use dampwave::weyl::commutator_identity_check;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: dampwave::Error) -> PyErr {
    match e {
        dampwave::Error::InvalidParameter(_) | dampwave::Error::UnknownName(_) | dampwave::Error::Precondition(_) => {
            PyValueError::new_err(e.to_string())
        }
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn grid(n: usize) -> PyResult<PeriodicGrid> {
    PeriodicGrid::new(n).map_err(err)
}

/// A damping profile `W(x)` on the circle.
#[pyclass(name = "DampingProfile", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProfile {
    inner: dampwave::DampingProfile,
}

#[pymethods]
impl PyProfile {
    /// Build a named profile: `strip`, `polynomial`, `oscillating` or `constant`.
    #[new]
    #[pyo3(signature = (name, **params))]
    fn new(name: &str, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let p = dampwave::DampingProfile::from_name(name, &params.unwrap_or_default()).map_err(err)?;
        Ok(PyProfile { inner: p })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn zero_halfwidth(&self) -> f64 {
        self.inner.zero_halfwidth
    }

    fn w(&self, x: f64) -> f64 {
        self.inner.w(x)
    }

    /// Values at the `n` grid nodes.
    fn sample(&self, n: usize) -> PyResult<Vec<f64>> {
        Ok(self.inner.sample(grid(n)?))
    }

    fn __repr__(&self) -> String {
        format!("DampingProfile({})", self.inner.name)
    }
}

/// `‖P⁻¹‖` for `P = −∂ₓ² + iqW − β` on an `n`-point grid.
#[pyfunction]
fn resolvent_norm(profile: &PyProfile, q: f64, beta: f64, n: usize) -> PyResult<f64> {
    let sp = StationaryProblem::new(profile.inner.clone(), q, beta, grid(n)?).map_err(err)?;
    resolvent::resolvent_norm(&sp).map_err(err)
}

/// Worst β on `[eps2, q²]` and the norm there.
#[pyfunction]
#[pyo3(signature = (profile, q, n, eps2 = resolvent::DEFAULT_EPS2))]
fn worst_beta(profile: &PyProfile, q: f64, n: usize, eps2: f64) -> PyResult<(f64, f64)> {
    resolvent::worst_beta(&profile.inner, q, grid(n)?, eps2).map_err(err)
}

/// Largest 1D resolvent norm over y-modes; returns `(norm, k, beta)`.
#[pyfunction]
#[pyo3(signature = (profile, q, n, margin = resolvent::DEFAULT_MARGIN))]
fn resolvent_2d_norm(profile: &PyProfile, q: f64, n: usize, margin: f64) -> PyResult<(f64, i64, f64)> {
    let r = resolvent::resolvent_2d_norm(&profile.inner, q, grid(n)?, margin).map_err(err)?;
    Ok((r.norm, r.k_at_max, r.beta_at_max))
}

/// Slope of the 2D resolvent norm against q on a log grid; returns
/// `(slope, r_squared, qs, norms)`.
#[pyfunction]
#[pyo3(signature = (profile, q_from, q_to, count, mult = 8, min_n = 128, snap = true))]
fn resolvent_exponent(
    profile: &PyProfile,
    q_from: f64,
    q_to: f64,
    count: usize,
    mult: usize,
    min_n: usize,
    snap: bool,
) -> PyResult<(f64, f64, Vec<f64>, Vec<f64>)> {
    let (fit, pts) = fit_resolvent_exponent(
        &profile.inner,
        &logspace(q_from, q_to, count),
        GridRule::Scaled { mult, min: min_n },
        &BetaStrategy::Modes { margin: resolvent::DEFAULT_MARGIN },
        snap,
    )
    .map_err(err)?;
    Ok((fit.slope, fit.r_squared, pts.iter().map(|p| p.q).collect(), pts.iter().map(|p| p.norm).collect()))
}

/// Relative residual of `Im⟨Pu, u⟩ = q∫W|u|²` for a random source.
#[pyfunction]
#[pyo3(signature = (profile, q, beta, n, seed = 0))]
fn damping_identity_residual(profile: &PyProfile, q: f64, beta: f64, n: usize, seed: u64) -> PyResult<f64> {
    let g = grid(n)?;
    let f = GridFunction::new(g, start_vector(n, seed)).map_err(err)?;
    let sp = StationaryProblem::new(profile.inner.clone(), q, beta, g).map_err(err)?;
    let u = solve_problem(&sp, &f).map_err(err)?;
    Ok(damping_identity_check(&sp, &u, &f).map_err(err)?.identity_residual)
}

/// Relative residual of the semiclassical commutator identity for a random source.
#[pyfunction]
#[pyo3(signature = (profile, h, tau, gamma, beta, n, seed = 0))]
fn commutator_identity_residual(
    profile: &PyProfile,
    h: f64,
    tau: f64,
    gamma: u32,
    beta: f64,
    n: usize,
    seed: u64,
) -> PyResult<f64> {
    let f = GridFunction::new(grid(n)?, start_vector(n, seed)).map_err(err)?;
    Ok(commutator_identity_check(&profile.inner, h, tau, gamma, beta, &f).map_err(err)?.residual)
}

/// `(C, identity_residual)` of the low-energy estimate for a Gaussian source.
#[pyfunction]
#[pyo3(signature = (profile, q, beta, n, eps1 = resolvent::DEFAULT_EPS1))]
fn low_energy(profile: &PyProfile, q: f64, beta: f64, n: usize, eps1: f64) -> PyResult<(f64, f64)> {
    let g = grid(n)?;
    let f = sample_real(|x| (-wrap(x).powi(2) / 0.1).exp(), g);
    let r = low_energy_certificate(&profile.inner, q, beta, eps1, g, &f).map_err(err)?;
    Ok((r.constant, r.identity_residual))
}

/// Worst-case decay ensemble; returns `(alpha, window, times, envelope)`
/// with the envelope as `E^{1/2}/data_norm`.
#[pyfunction]
#[pyo3(signature = (profile, k_max, n, t_max = 1e5, n_times = 200, seed = 0))]
#[allow(clippy::type_complexity)]
fn decay_ensemble(
    profile: &PyProfile,
    k_max: i64,
    n: usize,
    t_max: f64,
    n_times: usize,
    seed: u64,
) -> PyResult<(f64, (f64, f64), Vec<f64>, Vec<f64>)> {
    let mut t = vec![0.0];
    t.extend(logspace(1.0, t_max, n_times));
    let e = worst_case_ensemble(&profile.inner, k_max, grid(n)?, &t, seed).map_err(err)?;
    Ok((e.fit.alpha, e.window, t, e.envelope.normalized()))
}

/// `(predicted_alpha, difference, pass)` for resolvent growth `q^s`.
#[pyfunction]
fn alpha_cross_check(resolvent_slope: f64, fitted_alpha: f64) -> PyResult<(f64, f64, bool)> {
    let c = cross_check_alpha(resolvent_slope, fitted_alpha).map_err(err)?;
    Ok((c.predicted_alpha, c.difference, c.pass))
}

/// Run a sweep config; returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (config, force = false, jobs = None, cache_dir = None))]
fn run_sweep(config: PathBuf, force: bool, jobs: Option<usize>, cache_dir: Option<PathBuf>) -> PyResult<String> {
    let r = sweep::run(&config, &RunOptions { force, jobs, cache_dir })
        .map_err(|e| PyRuntimeError::new_err(format!("exit code {}: {e}", e.exit_code())))?;
    serde_json::to_string(&r).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn dampwave_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProfile>()?;
    m.add_function(wrap_pyfunction!(resolvent_norm, m)?)?;
    m.add_function(wrap_pyfunction!(worst_beta, m)?)?;
    m.add_function(wrap_pyfunction!(resolvent_2d_norm, m)?)?;
    m.add_function(wrap_pyfunction!(resolvent_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(damping_identity_residual, m)?)?;
    m.add_function(wrap_pyfunction!(commutator_identity_residual, m)?)?;
    m.add_function(wrap_pyfunction!(low_energy, m)?)?;
    m.add_function(wrap_pyfunction!(decay_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_cross_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
