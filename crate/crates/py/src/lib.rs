//! Python bindings. Every function returns the same JSON document the CLI prints.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use cuspidal::cli::{self, CliError};
use cuspidal::cycles::{ChainSpec, SubBranch};
use cuspidal::exact::parse_rational;
use cuspidal::hamiltonian::HamiltonianModel;
use cuspidal::lienard::{jacobian_rank, solve_case, LienardParams};

fn err(e: CliError) -> PyErr {
    match e {
        CliError::Schema(m) => PyValueError::new_err(m),
        CliError::Numeric(m) => PyArithmeticError::new_err(m),
    }
}

fn dump(v: serde_json::Value) -> String {
    serde_json::to_string(&v).expect("serializable")
}

#[pyfunction]
#[pyo3(signature = (digits = 30))]
fn constants(digits: u32) -> PyResult<String> {
    cli::constants_report(digits).map(dump).map_err(err)
}

/// `model_json` as accepted by `--model`; the Liénard Hamiltonian when omitted.
#[pyfunction]
#[pyo3(signature = (model_json = None))]
fn classify(model_json: Option<&str>) -> PyResult<String> {
    let model = match model_json {
        Some(t) => HamiltonianModel::from_json(t).map_err(|e| err(e.into()))?,
        None => HamiltonianModel::lienard(),
    };
    cli::classify(&model).map(dump).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (model_json = None, order = 14))]
fn h_series(model_json: Option<&str>, order: usize) -> PyResult<String> {
    let model = match model_json {
        Some(t) => HamiltonianModel::from_json(t).map_err(|e| err(e.into()))?,
        None => HamiltonianModel::lienard(),
    };
    cli::h_series_report(&model, order).map(dump).map_err(err)
}

/// Coefficient brackets and values for `a` given as `"p/q"` strings.
#[pyfunction]
#[pyo3(signature = (a, digits = 30))]
fn lienard_coeffs(a: Vec<String>, digits: u32) -> PyResult<String> {
    let v = a
        .iter()
        .map(|s| parse_rational(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| err(e.into()))?;
    let p = LienardParams::from_slice(&v).map_err(|e| err(e.into()))?;
    cli::coeffs_report(&p, digits).map(dump).map_err(err)
}

#[pyfunction]
fn lienard_solve(case: u32) -> PyResult<String> {
    solve_case(case).map(|s| dump(s.to_json())).map_err(|e| err(e.into()))
}

#[pyfunction]
fn lienard_rank(case: u32) -> PyResult<usize> {
    jacobian_rank(case).map_err(|e| err(e.into()))
}

#[pyfunction]
#[pyo3(signature = (l = 9, variant = 1, ratio = 1e-4, digits = 60, sub_branch = "a", c8_sign = -1))]
fn cycles_count(l: u32, variant: u32, ratio: f64, digits: u32, sub_branch: &str, c8_sign: i32) -> PyResult<String> {
    let mut spec = ChainSpec::new(l, variant);
    spec.ratio = ratio;
    spec.digits = digits;
    spec.sub_branch = sub_branch.parse::<SubBranch>().map_err(PyValueError::new_err)?;
    if c8_sign != 1 && c8_sign != -1 {
        return Err(PyValueError::new_err("c8_sign must be 1 or -1"));
    }
    spec.c8_sign = c8_sign;
    cli::count_report(&spec, false).map(dump).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (case, digits = 30, h_grid = "geometric:1e-9,1e-3,40"))]
fn reproduce(case: u32, digits: u32, h_grid: &str) -> PyResult<String> {
    cli::reproduce(case, digits, h_grid).map(dump).map_err(err)
}

#[pymodule]
#[pyo3(name = "cuspidal")]
fn cuspidal_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(constants, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(h_series, m)?)?;
    m.add_function(wrap_pyfunction!(lienard_coeffs, m)?)?;
    m.add_function(wrap_pyfunction!(lienard_solve, m)?)?;
    m.add_function(wrap_pyfunction!(lienard_rank, m)?)?;
    m.add_function(wrap_pyfunction!(cycles_count, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce, m)?)?;
    Ok(())
}
