//! Python bindings for the entry points a notebook wants first: the
//! closed-form photon-orbit radius, the trapped-point solve, the expansion
//! rates, and the torus-model hypothesis check. Results cross the boundary
//! as plain dicts of floats, so the Python side needs no wrapper types.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nhim::kerr::{
    equatorial_orbit_guess, equatorial_trapped_radius, expansion_rates as rates,
    trapped_set_solve, ConformalFactor, KerrParams, ReducedBranch, TrappedMode, TrappedPoint,
};
use nhim::torus;

fn check_subextremal(m: f64, a: f64) -> PyResult<KerrParams> {
    if !(m > 0.0 && a.abs() < m) {
        return Err(PyValueError::new_err(format!(
            "need a subextremal pair: m > 0 and |a| < m (got m = {m}, a = {a})"
        )));
    }
    Ok(KerrParams::new(m, a))
}

fn branch(prograde: bool) -> ReducedBranch {
    if prograde {
        ReducedBranch::Prograde
    } else {
        ReducedBranch::Retrograde
    }
}

fn solve_equatorial(params: &KerrParams, prograde: bool) -> PyResult<TrappedPoint> {
    let guess = equatorial_orbit_guess(params, branch(prograde), 1.0);
    trapped_set_solve(params, TrappedMode::Equatorial, &guess, 1e-12)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Closed-form radius of the equatorial trapped orbit.
#[pyfunction]
#[pyo3(signature = (m, a, prograde = true))]
fn trapped_radius(m: f64, a: f64, prograde: bool) -> PyResult<f64> {
    let params = check_subextremal(m, a)?;
    Ok(equatorial_trapped_radius(&params, branch(prograde)))
}

/// Newton solve of the equatorial trapped point; returns the phase-space
/// coordinates and the three defining residuals.
#[pyfunction]
#[pyo3(signature = (m, a, prograde = true))]
fn trapped_solve<'py>(py: Python<'py>, m: f64, a: f64, prograde: bool) -> PyResult<Bound<'py, PyDict>> {
    let params = check_subextremal(m, a)?;
    let tp = solve_equatorial(&params, prograde)?;
    let out = PyDict::new(py);
    out.set_item("r", tp.point.r)?;
    out.set_item("theta", tp.point.theta)?;
    out.set_item("sigma", tp.point.sigma)?;
    out.set_item("xi_r", tp.point.xi_r)?;
    out.set_item("xi_theta", tp.point.xi_theta)?;
    out.set_item("xi_phi", tp.point.xi_phi)?;
    out.set_item("residuals", tp.residuals.to_vec())?;
    Ok(out)
}

/// Transverse expansion rates at the equatorial trapped point, with the
/// conformal normalization that makes the minimal rate scale-invariant.
#[pyfunction]
#[pyo3(signature = (m, a, prograde = true))]
fn expansion_rates<'py>(
    py: Python<'py>,
    m: f64,
    a: f64,
    prograde: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let params = check_subextremal(m, a)?;
    let tp = solve_equatorial(&params, prograde)?;
    let er = rates(&params, &tp, ConformalFactor::RhoSquared, 1e-5)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let out = PyDict::new(py);
    out.set_item("w_u", er.w_u)?;
    out.set_item("w_s", er.w_s)?;
    out.set_item("nu_min", er.nu_min)?;
    Ok(out)
}

/// Checks the normal-hyperbolicity identities of the torus model: both
/// rates and the scaled stable-unstable bracket evaluate to one.
#[pyfunction]
#[pyo3(signature = (fd_step = 0.0))]
fn torus_verify<'py>(py: Python<'py>, fd_step: f64) -> PyResult<Bound<'py, PyDict>> {
    let report = torus::torus_verify(fd_step);
    let out = PyDict::new(py);
    out.set_item("w_u", report.w_u_at_gamma)?;
    out.set_item("w_s", report.w_s_at_gamma)?;
    out.set_item("bracket", report.bracket_at_gamma)?;
    Ok(out)
}

#[pymodule]
fn nhim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(trapped_radius, m)?)?;
    m.add_function(wrap_pyfunction!(trapped_solve, m)?)?;
    m.add_function(wrap_pyfunction!(expansion_rates, m)?)?;
    m.add_function(wrap_pyfunction!(torus_verify, m)?)?;
    Ok(())
}
