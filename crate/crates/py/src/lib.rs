//! Python bindings. Reports that are plain data come back as dicts via JSON.

use std::collections::BTreeMap;

use hadamard::cli::{execute, Cli};
use hadamard::dirichlet::{exhaust, BoundaryData, FourierMode, HarmonicSolution};
use hadamard::jacobi::{solve_jacobi, JacobiSolution};
use hadamard::models::{catalog_lookup, CurvatureProfile, DataC, RadialFunction};
use hadamard::rotsym::{ball_volume, distance, GeoPoint, RotSymSurface};
use hadamard::sc_gate::{decide_sc, ScParams};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use clap::Parser;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(err)?;
    py.import("json")?.call_method1("loads", (s,))
}

/// Curvature bounds `-b^2 <= K <= -a^2` from the model catalog.
#[pyclass(name = "Profile", module = "hadamard")]
struct PyProfile {
    inner: CurvatureProfile,
}

#[pymethods]
impl PyProfile {
    #[new]
    #[pyo3(signature = (name, params = None, r_star = None))]
    fn new(name: &str, params: Option<BTreeMap<String, f64>>, r_star: Option<f64>) -> PyResult<Self> {
        let inner = catalog_lookup(name, &params.unwrap_or_default(), r_star).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn r_star(&self) -> f64 {
        self.inner.r_star
    }

    fn a(&self, t: f64) -> PyResult<f64> {
        self.inner.a.eval(t).map_err(err)
    }

    fn b(&self, t: f64) -> PyResult<f64> {
        self.inner.b.eval(t).map_err(err)
    }

    /// Branch decision of the strict-convexity gate on `window`.
    #[pyo3(signature = (t1, eps, eps_tilde, window, c1 = 1.0, dim = 2, eps1 = None, alpha = None, lam = 0.75, t0 = 1.0, pinch2_eps = 0.1))]
    #[allow(clippy::too_many_arguments)]
    fn decide_sc<'py>(
        &self,
        py: Python<'py>,
        t1: f64,
        eps: f64,
        eps_tilde: f64,
        window: (f64, f64),
        c1: f64,
        dim: usize,
        eps1: Option<f64>,
        alpha: Option<f64>,
        lam: f64,
        t0: f64,
        pinch2_eps: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let data = DataC::new(self.inner.clone(), t1, eps, eps_tilde, c1, dim).map_err(err)?;
        let eps1 = eps1.unwrap_or(0.5 * (eps + eps_tilde));
        let alpha = alpha.unwrap_or(0.4 * (eps1 - eps_tilde));
        let params = ScParams::new(&data, eps1, alpha, lam, t0, pinch2_eps).map_err(err)?;
        let verdict = py.detach(|| decide_sc(&data, &params, window)).map_err(err)?;
        to_py(py, &verdict)
    }

    fn __repr__(&self) -> String {
        format!("Profile(r_star={})", self.inner.r_star)
    }
}

/// Solution of `f'' = k^2 f`, `f(0) = 0`, `f'(0) = 1`, kept in log form.
#[pyclass(name = "JacobiSolution", module = "hadamard")]
struct PyJacobi {
    inner: JacobiSolution,
}

#[pymethods]
impl PyJacobi {
    #[staticmethod]
    #[pyo3(signature = (k, t_max, rtol = 1e-8))]
    fn constant(py: Python<'_>, k: f64, t_max: f64, rtol: f64) -> PyResult<Self> {
        let inner = py.detach(|| solve_jacobi(&RadialFunction::constant(k), t_max, rtol)).map_err(err)?;
        Ok(Self { inner })
    }

    /// Solve with `k = a` (`which = "a"`) or `k = b` of a profile.
    #[staticmethod]
    #[pyo3(signature = (profile, t_max, which = "a", rtol = 1e-8))]
    fn from_profile(py: Python<'_>, profile: &PyProfile, t_max: f64, which: &str, rtol: f64) -> PyResult<Self> {
        let k = match which {
            "a" => &profile.inner.a,
            "b" => &profile.inner.b,
            other => return Err(PyValueError::new_err(format!("which must be 'a' or 'b', got {other:?}"))),
        };
        let inner = py.detach(|| solve_jacobi(k, t_max, rtol)).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn t_max(&self) -> f64 {
        self.inner.t_max()
    }

    fn log_f(&self, t: f64) -> PyResult<f64> {
        self.inner.log_f(t).map_err(err)
    }

    fn f(&self, t: f64) -> PyResult<f64> {
        self.inner.f(t).map_err(err)
    }

    /// `f'/f`.
    fn u(&self, t: f64) -> PyResult<f64> {
        self.inner.u(t).map_err(err)
    }

    fn grid(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (self.inner.t_grid(), self.inner.log_f_values(), self.inner.u_values())
    }
}

/// Rotationally symmetric model `dr^2 + f(r)^2 dθ^2`.
#[pyclass(name = "Surface", module = "hadamard")]
struct PySurface {
    inner: RotSymSurface,
}

fn point(p: (f64, f64)) -> PyResult<GeoPoint> {
    GeoPoint::new(p.0, p.1).map_err(err)
}

#[pymethods]
impl PySurface {
    /// Curvature `-kappa^2`.
    #[staticmethod]
    #[pyo3(signature = (kappa, dim = 2))]
    fn constant_curvature(kappa: f64, dim: usize) -> PyResult<Self> {
        Ok(Self { inner: RotSymSurface::constant_curvature(kappa, dim).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (dim = 2))]
    fn flat(dim: usize) -> PyResult<Self> {
        Ok(Self { inner: RotSymSurface::flat(dim).map_err(err)? })
    }

    /// Warp function solved from the radial curvature `-b(r)^2` of a profile.
    #[staticmethod]
    #[pyo3(signature = (profile, r_max, rtol = 1e-10, dim = 2))]
    fn from_profile(py: Python<'_>, profile: &PyProfile, r_max: f64, rtol: f64, dim: usize) -> PyResult<Self> {
        let inner = py.detach(|| RotSymSurface::from_curvature(&profile.inner.b, r_max, rtol, dim)).map_err(err)?;
        Ok(Self { inner })
    }

    fn f(&self, r: f64) -> PyResult<f64> {
        self.inner.f(r).map_err(err)
    }

    /// Geodesic distance between polar points `(r, θ)`.
    fn distance(&self, p: (f64, f64), q: (f64, f64)) -> PyResult<f64> {
        distance(&self.inner, point(p)?, point(q)?).map_err(err)
    }

    /// Volume of a totally geodesic `k`-ball of radius `t` about the pole.
    fn ball_volume(&self, k: usize, t: f64) -> PyResult<f64> {
        ball_volume(&self.inner, k, t).map_err(err)
    }
}

/// Harmonic extension of Fourier boundary data through an exhaustion by disks.
#[pyclass(name = "HarmonicSolution", module = "hadamard")]
struct PyHarmonic {
    inner: HarmonicSolution,
}

#[pymethods]
impl PyHarmonic {
    fn eval(&self, r: f64, theta: f64) -> PyResult<f64> {
        self.inner.eval(r, theta).map_err(err)
    }

    fn eval_on(&self, j: usize, r: f64, theta: f64) -> PyResult<f64> {
        if j >= self.inner.radii.len() {
            return Err(PyValueError::new_err(format!("disk index {j} out of range")));
        }
        self.inner.eval_on(j, r, theta).map_err(err)
    }

    #[getter]
    fn radii(&self) -> Vec<f64> {
        self.inner.radii.clone()
    }

    fn modes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.modes)
    }
}

/// `modes` is a list of `(n, a, b)` for `a cos nθ + b sin nθ`.
#[pyfunction]
#[pyo3(signature = (surface, modes, radii, rtol = 1e-10))]
fn dirichlet(py: Python<'_>, surface: &PySurface, modes: Vec<(u32, f64, f64)>, radii: Vec<f64>, rtol: f64) -> PyResult<PyHarmonic> {
    let data = BoundaryData::new(modes.into_iter().map(|(n, a, b)| FourierMode { n, a, b }).collect()).map_err(err)?;
    let inner = py.detach(|| exhaust(&surface.inner, &data, &radii, rtol)).map_err(err)?;
    Ok(PyHarmonic { inner })
}

/// Run a command-line invocation in-process; returns `(report, csv)` with the
/// report as a dict and the CSV files as a name-to-text dict. Nothing is written.
#[pyfunction]
fn run<'py>(py: Python<'py>, args: Vec<String>) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyDict>)> {
    let cli = Cli::try_parse_from(std::iter::once("hadamard".to_string()).chain(args)).map_err(err)?;
    let outcome = py.detach(|| execute(&cli)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let report = py.import("json")?.call_method1("loads", (outcome.json,))?;
    let csv = PyDict::new(py);
    for (name, body) in outcome.csv {
        csv.set_item(name, body)?;
    }
    Ok((report, csv))
}

#[pymodule]
#[pyo3(name = "hadamard")]
fn hadamard_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProfile>()?;
    m.add_class::<PyJacobi>()?;
    m.add_class::<PySurface>()?;
    m.add_class::<PyHarmonic>()?;
    m.add_function(wrap_pyfunction!(dirichlet, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
