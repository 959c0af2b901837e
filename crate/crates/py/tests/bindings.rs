use pyo3::prelude::*;
use pyo3::types::PyDict;

#[test]
fn simulate_returns_the_coexistence_outcome() {
    Python::attach(|py| {
        let run = oncovir_py::simulate(
            py,
            0.1,
            0.01,
            0.1,
            5000.0,
            (50.0, 10.0, 10.0),
            100.0,
            None,
            1e-9,
            1e-11,
        )
        .unwrap();
        let outcome: String = run.get_item("outcome").unwrap().unwrap().extract().unwrap();
        assert_eq!(outcome, "coexistence");
        let fin: (f64, f64, f64) = run.get_item("final").unwrap().unwrap().extract().unwrap();
        assert!((fin.0 - 40.6570).abs() < 1e-3);
    });
}

#[test]
fn invalid_parameters_raise_value_error() {
    Python::attach(|py| {
        let err = oncovir_py::equilibria(py, 0.1, -1.0, 0.1, 100.0).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}

#[test]
fn hopf_points_carry_criticality() {
    Python::attach(|py| {
        let pts = oncovir_py::hopf_points(py, 0.1, 0.01, 0.1, "xi", 1e-4, 1.0, 100.0, 400).unwrap();
        let first = pts.get_item(0).unwrap();
        let d = first.cast::<PyDict>().unwrap();
        let xi: f64 = d.get_item("xi").unwrap().unwrap().extract().unwrap();
        let crit: String = d
            .get_item("criticality")
            .unwrap()
            .unwrap()
            .extract()
            .unwrap();
        assert!((xi - 0.0429).abs() < 1e-4);
        assert_eq!(crit, "supercritical");
    });
}
