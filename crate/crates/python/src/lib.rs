use std::collections::BTreeMap;
use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lvctl::config::Config;
use lvctl::discretization::{principal_eigenvalue, Grid};
use lvctl::elliptic::{homogeneous_coexistence, solve_logistic_theta};
use lvctl::model::{classify_regime, Params};
use lvctl::parabolic::{simulate, ControlSet, Equation, SimOptions, StatePair};
use lvctl::Error;

fn to_py(e: Error) -> PyErr {
    let msg = format!("{}: {e}", e.kind());
    match e {
        Error::NotConverged { .. }
        | Error::BlowUp { .. }
        | Error::Stagnated { .. }
        | Error::SteeringFailed { .. }
        | Error::Io(_) => PyRuntimeError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn params(raw: BTreeMap<String, f64>) -> PyResult<Params> {
    Params::from_map(&raw).map_err(to_py)
}

/// Preset parameter sets: "barrier" or "coexistence".
#[pyfunction]
fn preset_params(name: &str) -> PyResult<BTreeMap<String, f64>> {
    let p = match name {
        "barrier" => Params::barrier_preset(),
        "coexistence" => Params::coexistence_preset(),
        _ => return Err(PyValueError::new_err(format!("unknown preset `{name}`"))),
    };
    Ok(BTreeMap::from([
        ("a1".into(), p.a1),
        ("a2".into(), p.a2),
        ("b1".into(), p.b1),
        ("b2".into(), p.b2),
        ("c1".into(), p.c1),
        ("c2".into(), p.c2),
        ("d1".into(), p.d1),
        ("d2".into(), p.d2),
        ("L".into(), p.length),
        ("omega_lo".into(), p.omega.0),
        ("omega_hi".into(), p.omega.1),
    ]))
}

/// Returns `(discrete, analytic)` principal Dirichlet eigenvalues.
#[pyfunction]
fn principal_eigenvalues(length: f64, n: usize) -> PyResult<(f64, f64)> {
    let grid = Grid::new(length, n).map_err(to_py)?;
    let e = principal_eigenvalue(&grid).map_err(to_py)?;
    Ok((e.lambda1_discrete, e.lambda1_analytic))
}

#[pyfunction]
fn logistic_theta(a: f64, d: f64, length: f64, n: usize) -> PyResult<Vec<f64>> {
    let p = Params {
        a1: a,
        a2: a,
        d1: d,
        d2: d,
        length,
        omega: (0.0, length),
        ..Params::coexistence_preset()
    };
    let grid = Grid::new(length, n).map_err(to_py)?;
    Ok(solve_logistic_theta(&p, &grid).map_err(to_py)?.into_inner())
}

/// `(u*, v*)` of the homogeneous coexistence state.
#[pyfunction]
fn coexistence_point(raw: BTreeMap<String, f64>) -> PyResult<(f64, f64)> {
    let h = homogeneous_coexistence(&params(raw)?).map_err(to_py)?;
    Ok((h.u_star, h.v_star))
}

/// Regime report in the same text form the CLI prints.
#[pyfunction]
fn regime_report(raw: BTreeMap<String, f64>, n: usize) -> PyResult<String> {
    let p = params(raw)?;
    let grid = Grid::new(p.length, n).map_err(to_py)?;
    let lambda1 = principal_eigenvalue(&grid).map_err(to_py)?.lambda1_discrete;
    Ok(classify_regime(&p, lambda1).to_string())
}

/// Simulates with constant controls and returns the terminal `(u, v)`.
#[pyfunction]
#[pyo3(signature = (raw, n, init, t_final, dt, boundary=(0.0, 0.0), h=0.0, on_v=false))]
#[allow(clippy::too_many_arguments)]
fn simulate_constant(
    raw: BTreeMap<String, f64>,
    n: usize,
    init: (f64, f64),
    t_final: f64,
    dt: f64,
    boundary: (f64, f64),
    h: f64,
    on_v: bool,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let p = params(raw)?;
    let grid = Grid::new(p.length, n).map_err(to_py)?;
    let equation = if on_v { Equation::Second } else { Equation::First };
    let ctrl = ControlSet::constant(1, grid.support(p.omega), boundary, h, equation);
    let start = StatePair::constant(&grid, init.0, init.1);
    let opts = SimOptions {
        snapshot_stride: usize::MAX,
    };
    let traj = simulate(&p, &grid, &start, &ctrl, t_final, dt, opts).map_err(to_py)?;
    let end = traj.terminal_state;
    Ok((end.u.into_inner(), end.v.into_inner()))
}

/// Runs a scenario config and returns its summary.
#[pyfunction]
#[pyo3(signature = (config, out_dir, jobs=1))]
fn run_scenario(config: &str, out_dir: &str, jobs: usize) -> PyResult<String> {
    let cfg = Config::from_path(Path::new(config)).map_err(to_py)?;
    let out = lvctl::scenario::run_scenario(&cfg, Path::new(out_dir), jobs).map_err(to_py)?;
    Ok(out.summary)
}

#[pymodule]
#[pyo3(name = "lvctl")]
fn lvctl_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(preset_params, m)?)?;
    m.add_function(wrap_pyfunction!(principal_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(logistic_theta, m)?)?;
    m.add_function(wrap_pyfunction!(coexistence_point, m)?)?;
    m.add_function(wrap_pyfunction!(regime_report, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_constant, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
