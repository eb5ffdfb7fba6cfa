//! Python bindings: fields, focal values, cycle scans and the case-study checks.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use qhfocus::case_study::{self, Coeffs, UnfoldingFamily, RELAXED};
use qhfocus::cycles::{self, AlternationOptions, DisplacementOptions, ScanOptions, System};
use qhfocus::focal::{self, Family, FocalOptions};
use qhfocus::polar::ChartOptions;
use qhfocus::{flow, Error, PolarRhs, Precision};

fn err(e: Error) -> PyErr {
    match e {
        Error::Parse { .. } | Error::Precondition(_) | Error::InvalidField(_) | Error::Domain(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn precision(name: &str) -> PyResult<Precision> {
    match name {
        "double" => Ok(Precision::Double),
        "extended" => Ok(Precision::Extended),
        other => Err(PyValueError::new_err(format!("precision must be 'double' or 'extended', got '{other}'"))),
    }
}

fn chart(relaxed: bool) -> ChartOptions {
    if relaxed {
        RELAXED
    } else {
        ChartOptions::default()
    }
}

/// Converts any serializable report into plain Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Planar field whose leading part is `(-p y^(2p-1), q x^(2q-1))`.
#[pyclass(name = "WeightedField", module = "qhfocus")]
struct PyField {
    inner: qhfocus::WeightedField,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(p: u32, q: u32) -> PyResult<Self> {
        if p == 0 || q == 0 {
            return Err(PyValueError::new_err("weights must be positive"));
        }
        Ok(PyField { inner: qhfocus::WeightedField::new(p, q) })
    }

    /// Parses the text format used by the command-line tool.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyField { inner: qhfocus::WeightedField::parse(text).map_err(err)? })
    }

    /// The 2:3 system with coefficients `a22, a50, b13, b41`.
    #[staticmethod]
    fn case_study(a22: f64, a50: f64, b13: f64, b41: f64) -> Self {
        PyField { inner: Coeffs::new(a22, a50, b13, b41).field() }
    }

    /// The two-parameter unfolding of the 2:3 degenerate focus.
    #[staticmethod]
    fn unfolding(eps1: f64, eps2: f64) -> PyResult<Self> {
        Ok(PyField { inner: UnfoldingFamily.field(&[eps1, eps2]).map_err(err)? })
    }

    fn add_x(&mut self, k: u32, j: u32, c: f64) {
        self.inner.add_x(k, j, c);
    }

    fn add_y(&mut self, k: u32, j: u32, c: f64) {
        self.inner.add_y(k, j, c);
    }

    #[getter]
    fn weights(&self) -> (u32, u32) {
        self.inner.full_weights()
    }

    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.validate())
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        let (p, q) = self.inner.full_weights();
        format!("WeightedField({p}:{q}, {} x terms, {} y terms)", self.inner.x_terms().count(), self.inner.y_terms().count())
    }
}

/// Focal values `nu_k(2 pi)` and the weak-focus verdict.
#[pyfunction]
#[pyo3(signature = (field, order=None, tol=1e-12, zero_tol=1e-9, precision="double", relaxed=false))]
fn focal_values<'py>(
    py: Python<'py>,
    field: &PyField,
    order: Option<usize>,
    tol: f64,
    zero_tol: f64,
    precision: &str,
    relaxed: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = FocalOptions { order, tol, zero_tol, precision: self::precision(precision)? };
    let rhs = PolarRhs::with_options(&field.inner, chart(relaxed)).map_err(err)?;
    let report = py.detach(|| focal::focal_values_rhs(&rhs, &opts)).map_err(err)?;
    to_py(py, &report)
}

/// `Delta(h) = r(2 pi, h) - h`.
#[pyfunction]
#[pyo3(signature = (field, h, tol=1e-12, precision="double", relaxed=false))]
fn displacement(field: &PyField, h: f64, tol: f64, precision: &str, relaxed: bool) -> PyResult<f64> {
    let rhs = PolarRhs::with_options(&field.inner, chart(relaxed)).map_err(err)?;
    flow::displacement(&rhs, h, tol, self::precision(precision)?).map_err(err)
}

/// Scans `Delta` on a geometric grid and refines each sign change.
#[pyfunction]
#[pyo3(signature = (field, h_min=1e-3, h_max=0.3, grid=48, tol=1e-12, precision="double", backend="polar", relaxed=false))]
#[allow(clippy::too_many_arguments)]
fn find_cycles<'py>(
    py: Python<'py>,
    field: &PyField,
    h_min: f64,
    h_max: f64,
    grid: usize,
    tol: f64,
    precision: &str,
    backend: &str,
    relaxed: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let system = match backend {
        "polar" => System::polar(&field.inner, chart(relaxed)).map_err(err)?,
        "cartesian" => System::Cartesian(field.inner.to_polynomial()),
        other => return Err(PyValueError::new_err(format!("backend must be 'polar' or 'cartesian', got '{other}'"))),
    };
    let opts = ScanOptions {
        h_min,
        h_max,
        grid,
        displacement: DisplacementOptions { tol, precision: self::precision(precision)?, ..Default::default() },
        ..Default::default()
    };
    let set = py.detach(|| cycles::find_cycles(&system, &opts)).map_err(err)?;
    to_py(py, &set)
}

/// Tunes `(eps1, eps2)` of the 2:3 unfolding for the `(+, -, +)` chain on `nu2, nu4, nu6`.
#[pyfunction]
#[pyo3(signature = (h_scale=0.25, gap=None))]
fn unfolding_alternation<'py>(py: Python<'py>, h_scale: f64, gap: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
    let defaults = AlternationOptions::default();
    let opts = AlternationOptions { h_scale, gap: gap.unwrap_or(defaults.gap), ..defaults };
    let found = py
        .detach(|| {
            cycles::alternation_search(&UnfoldingFamily, &[2, 4, 6], &[1, -1, 1], &[(-1e-3, 1e-3), (-0.5, 0.5)], &[0.0, 0.0], &opts)
        })
        .map_err(err)?;
    to_py(py, &found)
}

/// Parity statistics of the first nonzero focal index over random fields.
#[pyfunction]
#[pyo3(signature = (p, q, samples=20, seed=42))]
fn parity_survey<'py>(py: Python<'py>, p: u32, q: u32, samples: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let s = py.detach(|| focal::parity_survey(p, q, samples, seed, &FocalOptions::default())).map_err(err)?;
    to_py(py, &s)
}

/// The case-study claim table.
#[pyfunction]
#[pyo3(signature = (tol=1e-12))]
fn verify<'py>(py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let claims = py.detach(|| case_study::claims(tol)).map_err(err)?;
    to_py(py, &claims)
}

/// `(I_A, I_B)` and the printed combination under the matching reading.
#[pyfunction]
#[pyo3(signature = (tol=1e-13))]
fn combination<'py>(py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let v = py.detach(|| case_study::verify_322(tol)).map_err(err)?;
    to_py(py, &v)
}

#[pymodule]
#[pyo3(name = "qhfocus")]
fn qhfocus_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyField>()?;
    m.add_function(wrap_pyfunction!(focal_values, m)?)?;
    m.add_function(wrap_pyfunction!(displacement, m)?)?;
    m.add_function(wrap_pyfunction!(find_cycles, m)?)?;
    m.add_function(wrap_pyfunction!(unfolding_alternation, m)?)?;
    m.add_function(wrap_pyfunction!(parity_survey, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(combination, m)?)?;
    Ok(())
}
