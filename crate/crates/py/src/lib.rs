//! Python bindings: run optimizations from config text and evaluate the
//! perimeter functional on indicator arrays.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ictm_core::io::{execute_run, parse_config, RunSpec};
use ictm_core::{
    initial_guess, perimeter_estimate, Extension, GridSpec, IctmError, IndicatorField,
    KernelParams, Optimizer,
};

fn py_err(e: IctmError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn single_run(config: &str) -> PyResult<RunSpec> {
    let runs = parse_config(config)
        .and_then(|m| m.expand())
        .map_err(py_err)?;
    match <[RunSpec; 1]>::try_from(runs) {
        Ok([run]) => Ok(run),
        Err(runs) => Err(PyValueError::new_err(format!(
            "config defines a sweep of {} runs; use expand_config",
            runs.len()
        ))),
    }
}

/// Expands a config into one normalized config text per run.
#[pyfunction]
fn expand_config(config: &str) -> PyResult<Vec<String>> {
    let runs = parse_config(config)
        .and_then(|m| m.expand())
        .map_err(py_err)?;
    Ok(runs.iter().map(RunSpec::to_config).collect())
}

/// Runs a single-run config in memory. Returns a dict with the termination
/// reason, the per-iteration records, the final indicator (node order, x
/// fastest) and the grid cells.
#[pyfunction]
fn optimize<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let run = single_run(config)?;
    let (result, perimeter, cells) = py
        .detach(|| {
            let case = run.case.build()?;
            let cells = case.grid.cells().to_vec();
            let chi0 = initial_guess(run.init, &case.grid, case.target_ones(), run.ictm.seed)?;
            let opt = Optimizer::new(case, run.ictm)?;
            let result = opt.run(chi0)?;
            let perimeter = opt.model().convolver().perimeter(&result.chi)?;
            Ok((result, perimeter, cells))
        })
        .map_err(py_err)?;

    let out = PyDict::new(py);
    out.set_item("termination", result.termination.to_string())?;
    out.set_item("cells", cells)?;
    out.set_item("chi", result.chi.values().to_vec())?;
    out.set_item("J", result.final_energy.j)?;
    out.set_item("J_tau", result.final_energy.j_tau)?;
    out.set_item("perimeter", perimeter)?;
    let mut records = Vec::with_capacity(result.records.len());
    for r in &result.records {
        let d = PyDict::new(py);
        d.set_item("k", r.k)?;
        d.set_item("J", r.j)?;
        d.set_item("J_tau", r.j_tau)?;
        d.set_item("volume_fraction", r.volume_fraction)?;
        d.set_item("flipped_nodes", r.flipped_nodes)?;
        d.set_item("correction_depth", r.correction_depth)?;
        d.set_item("wall_time_ms", r.wall_time_ms)?;
        records.push(d);
    }
    out.set_item("records", records)?;
    Ok(out)
}

/// Runs a single-run config and writes the usual output files into `out`.
/// Returns the summary as a dict.
#[pyfunction]
fn run<'py>(py: Python<'py>, config: &str, out: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let spec = single_run(config)?;
    let output = parse_config(config).map_err(py_err)?.output;
    let (summary, _) = py
        .detach(|| execute_run(&spec, &output, &out))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("dir", summary.dir)?;
    d.set_item("termination", summary.termination.to_string())?;
    d.set_item("iterations", summary.iterations)?;
    d.set_item("J", summary.j)?;
    d.set_item("J_tau", summary.j_tau)?;
    d.set_item("perimeter", summary.perimeter)?;
    d.set_item("volume_fraction", summary.volume_fraction)?;
    Ok(d)
}

/// Heat-content perimeter of a 0/1 indicator on the unit square or cube.
/// `cells` has one entry per axis; `chi` lists nodes with x fastest.
#[pyfunction]
#[pyo3(signature = (chi, cells, tau, extension = "mirror"))]
fn perimeter(chi: Vec<u8>, cells: Vec<usize>, tau: f64, extension: &str) -> PyResult<f64> {
    let grid = GridSpec::new(cells.len(), &cells, &vec![1.0; cells.len()]).map_err(py_err)?;
    let chi = IndicatorField::new(grid, chi).map_err(py_err)?;
    let ext: Extension = extension.parse().map_err(py_err)?;
    let params = KernelParams::new(tau, ext).map_err(py_err)?;
    perimeter_estimate(&chi, params).map_err(py_err)
}

#[pymodule]
fn ictm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(expand_config, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(perimeter, m)?)?;
    Ok(())
}
