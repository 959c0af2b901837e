//! Python bindings for the `oncovir` model.

use oncovir::continuation::{continue_equilibrium, hopf_points_along, BranchKind};
use oncovir::{
    equilibria as core_equilibria, integrate_to_outcome, Error, InjectionSchedule,
    IntegratorConfig, ModelParams, Param, State,
};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::StepUnderflow { .. }
        | Error::NonFinite { .. }
        | Error::ContinuationFailed { .. } => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn params(m: f64, xi: f64, gamma: f64, k: f64) -> PyResult<ModelParams> {
    ModelParams::new(m, xi, gamma, k).map_err(to_py)
}

fn parse_param(name: &str) -> PyResult<Param> {
    name.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown parameter `{name}`")))
}

/// Integrate one trajectory and classify its outcome.
///
/// `schedule` is `(D0, n, kappa, t0)` when injections are applied.
#[pyfunction]
#[pyo3(signature = (m, xi, gamma, horizon, initial=(50.0, 10.0, 10.0), k=100.0, schedule=None, rel_tol=1e-9, abs_tol=1e-11))]
#[allow(clippy::too_many_arguments)]
pub fn simulate<'py>(
    py: Python<'py>,
    m: f64,
    xi: f64,
    gamma: f64,
    horizon: f64,
    initial: (f64, f64, f64),
    k: f64,
    schedule: Option<(f64, u32, f64, f64)>,
    rel_tol: f64,
    abs_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params(m, xi, gamma, k)?;
    let sched = schedule
        .map(|(d0, n, kappa, t0)| InjectionSchedule::new(d0, n, kappa, t0))
        .transpose()
        .map_err(to_py)?;
    let cfg = IntegratorConfig {
        rel_tol,
        abs_tol,
        ..Default::default()
    };
    let s0 = State::new(initial.0, initial.1, initial.2);
    let (report, traj) = py
        .detach(|| integrate_to_outcome(&p, s0, &cfg, sched.as_ref(), horizon))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("t", &traj.times)?;
    d.set_item("U", traj.states.iter().map(|s| s.u).collect::<Vec<_>>())?;
    d.set_item("I", traj.states.iter().map(|s| s.i).collect::<Vec<_>>())?;
    d.set_item("V", traj.states.iter().map(|s| s.v).collect::<Vec<_>>())?;
    d.set_item("outcome", report.outcome.label())?;
    let f = report.final_state;
    d.set_item("final", (f.u, f.i, f.v))?;
    d.set_item("absorbed_at", report.absorbed_at)?;
    d.set_item("period", report.cycle.map(|c| c.period))?;
    Ok(d)
}

/// The three equilibria with eigenvalues and stability labels.
#[pyfunction]
#[pyo3(signature = (m, xi, gamma, k=100.0))]
pub fn equilibria<'py>(
    py: Python<'py>,
    m: f64,
    xi: f64,
    gamma: f64,
    k: f64,
) -> PyResult<Bound<'py, PyList>> {
    let p = params(m, xi, gamma, k)?;
    let out = PyList::empty(py);
    for e in core_equilibria(&p) {
        let d = PyDict::new(py);
        d.set_item("kind", e.kind.label())?;
        d.set_item("state", (e.state.u, e.state.i, e.state.v))?;
        d.set_item("physical", e.physical)?;
        d.set_item("classification", e.classification.label())?;
        let eig: Vec<(f64, f64)> = e.eigenvalues.iter().map(|z| (z.re, z.im)).collect();
        d.set_item("eigenvalues", eig)?;
        out.append(d)?;
    }
    Ok(out)
}

/// Hopf points of the coexistence state as `param` varies over `[lo, hi]`.
#[pyfunction]
#[pyo3(signature = (m, xi, gamma, param, lo, hi, k=100.0, samples=400))]
#[allow(clippy::too_many_arguments)]
pub fn hopf_points<'py>(
    py: Python<'py>,
    m: f64,
    xi: f64,
    gamma: f64,
    param: &str,
    lo: f64,
    hi: f64,
    k: f64,
    samples: usize,
) -> PyResult<Bound<'py, PyList>> {
    let p = params(m, xi, gamma, k)?;
    let y = parse_param(param)?;
    let out = PyList::empty(py);
    for h in hopf_points_along(&p, y, (lo, hi), samples) {
        let d = PyDict::new(py);
        d.set_item(param, h.params.get(y))?;
        d.set_item("omega", h.omega)?;
        d.set_item("l1", h.lyapunov)?;
        d.set_item("criticality", h.criticality.label())?;
        out.append(d)?;
    }
    Ok(out)
}

/// Bifurcations found while continuing an equilibrium branch in `param`.
#[pyfunction]
#[pyo3(signature = (m, xi, gamma, param, lo, hi, branch="coexistence", k=100.0))]
#[allow(clippy::too_many_arguments)]
pub fn bifurcations<'py>(
    py: Python<'py>,
    m: f64,
    xi: f64,
    gamma: f64,
    param: &str,
    lo: f64,
    hi: f64,
    branch: &str,
    k: f64,
) -> PyResult<Bound<'py, PyList>> {
    let p = params(m, xi, gamma, k)?;
    let q = parse_param(param)?;
    let kind = match branch {
        "coexistence" => BranchKind::Coexistence,
        "failed_treatment" => BranchKind::FailedTreatment,
        other => {
            return Err(PyValueError::new_err(format!(
                "unsupported branch `{other}`"
            )))
        }
    };
    let res = py
        .detach(|| continue_equilibrium(&p, kind, q, (lo, hi), &Default::default()))
        .map_err(to_py)?;
    let out = PyList::empty(py);
    for b in res.bifurcations {
        let d = PyDict::new(py);
        d.set_item("kind", b.kind.label())?;
        d.set_item(param, b.value1)?;
        d.set_item("criticality", b.criticality.label())?;
        d.set_item("l1", b.lyapunov)?;
        out.append(d)?;
    }
    Ok(out)
}

#[pymodule]
fn oncovir_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(equilibria, m)?)?;
    m.add_function(wrap_pyfunction!(hopf_points, m)?)?;
    m.add_function(wrap_pyfunction!(bifurcations, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_names_parse() {
        assert_eq!(parse_param("xi").unwrap(), Param::Xi);
        assert_eq!(parse_param("gamma").unwrap(), Param::Gamma);
        assert!(parse_param("beta").is_err());
    }
}
