//! Python bindings for the lattice Chern–Simons toolkit.
//!
//! Connections and other algebra-valued forms are [`Form`] objects, gauge
//! maps are [`Gauge`] objects, group elements cross the boundary as
//! quaternion tuples `(a, b, c, d)` and reports as plain dicts.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyComplex;

use cstk_core::fields::{smooth_random_form, SmoothSpec};
use cstk_core::gauge::FlatSearchOptions;
use cstk_core::holonomy::LoopPath;
use cstk_core::lines::{ConnectionPath, LineValue};
use cstk_core::rep::{Presentation as CorePresentation, Representation};
use cstk_core::spectral::{DiscFamily, EigenMode, TracePolynomial};
use cstk_core::{cs, gauge, io, lines, named, rep, spectral};
use cstk_core::{AlgebraElement, AlgebraForm, GaugeMap, GroupElement, TorusGrid};

create_exception!(cstk, CstkError, PyException, "Base class for toolkit errors.");
create_exception!(cstk, NonConvergenceError, CstkError, "A solver stopped before reaching its tolerance.");

fn err(e: cstk_core::Error) -> PyErr {
    if e.is_non_convergence() {
        NonConvergenceError::new_err(e.to_string())
    } else {
        CstkError::new_err(e.to_string())
    }
}

type R<T> = PyResult<T>;

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> R<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| CstkError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn quat(g: &GroupElement) -> (f64, f64, f64, f64) {
    let [a, b, c, d] = g.quaternion();
    (a, b, c, d)
}

fn group(q: (f64, f64, f64, f64)) -> R<GroupElement> {
    GroupElement::from_quaternion([q.0, q.1, q.2, q.3]).map_err(err)
}

fn complex<'py>(py: Python<'py>, v: LineValue) -> Bound<'py, PyComplex> {
    let z = v.complex();
    PyComplex::from_doubles(py, z.re, z.im)
}

#[pyclass(module = "cstk", frozen, eq, skip_from_py_object)]
#[derive(Clone, Copy, PartialEq)]
pub struct Grid(TorusGrid);

#[pymethods]
impl Grid {
    #[new]
    fn new(shape: Vec<usize>) -> R<Self> {
        TorusGrid::new(&shape).map(Grid).map_err(err)
    }

    #[staticmethod]
    fn cube(dim: usize, n: usize) -> R<Self> {
        TorusGrid::cube(dim, n).map(Grid).map_err(err)
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.0.shape().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn sites(&self) -> usize {
        self.0.sites()
    }

    fn __repr__(&self) -> String {
        format!("Grid({:?})", self.0.shape())
    }
}

/// An su(2)-valued differential form; degree 1 forms are connections.
#[pyclass(module = "cstk", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Form(AlgebraForm);

#[pymethods]
impl Form {
    #[staticmethod]
    fn zeros(grid: &Grid, degree: usize) -> R<Self> {
        AlgebraForm::zeros(grid.0, degree).map(Form).map_err(err)
    }

    /// Smooth random form with Fourier modes up to `max_mode`.
    #[staticmethod]
    #[pyo3(signature = (grid, degree, amplitude, max_mode = 1, seed = 1))]
    fn random(grid: &Grid, degree: usize, amplitude: f64, max_mode: u32, seed: u64) -> R<Self> {
        smooth_random_form(grid.0, degree, &SmoothSpec::new(amplitude, max_mode), seed).map(Form).map_err(err)
    }

    /// A built-in connection such as `zero`, `flat-constant` or `random:1.0`.
    #[staticmethod]
    #[pyo3(signature = (name, grid, seed = 1))]
    fn named(name: &str, grid: &Grid, seed: u64) -> R<Self> {
        match named::connection(name, grid.0, seed) {
            Some(r) => r.map(Form).map_err(err),
            None => Err(CstkError::new_err(format!("unknown connection name {name:?}"))),
        }
    }

    /// Per site, then per component in increasing axis-mask order.
    #[staticmethod]
    fn from_values(grid: &Grid, degree: usize, values: Vec<[f64; 3]>) -> R<Self> {
        AlgebraForm::from_values(grid.0, degree, values.into_iter().map(AlgebraElement).collect()).map(Form).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> R<Self> {
        match io::load_field(path).map_err(err)? {
            io::Field::Algebra(a) => Ok(Form(a)),
            other => Err(CstkError::new_err(format!("{path} holds a {} field", other.kind().name()))),
        }
    }

    fn save(&self, path: &str) -> R<()> {
        io::save_field(path, &io::Field::from(self.0.clone())).map_err(err)
    }

    fn values(&self) -> Vec<[f64; 3]> {
        self.0.values().iter().map(|v| v.coords()).collect()
    }

    #[getter]
    fn grid(&self) -> Grid {
        Grid(*self.0.grid())
    }

    #[getter]
    fn degree(&self) -> usize {
        self.0.degree()
    }

    fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }

    /// `self + s·other`.
    fn axpy(&self, s: f64, other: &Form) -> R<Self> {
        self.0.axpy(s, &other.0).map(Form).map_err(err)
    }

    fn scale(&self, s: f64) -> Self {
        Form(self.0.scale(s))
    }

    fn __add__(&self, other: &Form) -> R<Self> {
        self.0.add(&other.0).map(Form).map_err(err)
    }

    fn __sub__(&self, other: &Form) -> R<Self> {
        self.0.sub(&other.0).map(Form).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Form(degree={}, grid={:?})", self.0.degree(), self.0.grid().shape())
    }
}

/// A map from the torus to SU(2).
#[pyclass(module = "cstk", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Gauge(GaugeMap);

#[pymethods]
impl Gauge {
    #[staticmethod]
    fn identity(grid: &Grid) -> Self {
        Gauge(GaugeMap::identity(grid.0))
    }

    #[staticmethod]
    fn constant(grid: &Grid, q: (f64, f64, f64, f64)) -> R<Self> {
        Ok(Gauge(GaugeMap::constant(grid.0, group(q)?)))
    }

    /// The bundled degree-1 bump map on T³ (needs n ≥ 32 to be smooth).
    #[staticmethod]
    fn degree_one(grid: &Grid) -> R<Self> {
        GaugeMap::degree_one(grid.0).map(Gauge).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (grid, amplitude, max_mode = 1, seed = 1))]
    fn random(grid: &Grid, amplitude: f64, max_mode: u32, seed: u64) -> R<Self> {
        GaugeMap::smooth_random(grid.0, &SmoothSpec::new(amplitude, max_mode), seed).map(Gauge).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (name, grid, seed = 1))]
    fn named(name: &str, grid: &Grid, seed: u64) -> R<Self> {
        match named::gauge(name, grid.0, seed) {
            Some(r) => r.map(Gauge).map_err(err),
            None => Err(CstkError::new_err(format!("unknown gauge name {name:?}"))),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> R<Self> {
        io::load_gauge(path).map(Gauge).map_err(err)
    }

    fn save(&self, path: &str) -> R<()> {
        io::save_field(path, &io::Field::from(self.0.clone())).map_err(err)
    }

    fn values(&self) -> Vec<(f64, f64, f64, f64)> {
        self.0.values().iter().map(quat).collect()
    }

    #[getter]
    fn grid(&self) -> Grid {
        Grid(*self.0.grid())
    }

    fn inverse(&self) -> Self {
        Gauge(self.0.inverse())
    }

    fn __mul__(&self, other: &Gauge) -> R<Self> {
        self.0.mul(&other.0).map(Gauge).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Gauge(grid={:?})", self.0.grid().shape())
    }
}

/// A finitely presented group, parsed from `<x,y | x^2 y^-3>` or looked up
/// by bundled name (`trefoil`, `poincare`, `genus2`, ...).
#[pyclass(module = "cstk", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Presentation(CorePresentation);

#[pymethods]
impl Presentation {
    #[new]
    fn new(text: &str) -> R<Self> {
        match CorePresentation::bundled(text) {
            Some(p) => Ok(Presentation(p)),
            None => CorePresentation::parse(text).map(Presentation).map_err(err),
        }
    }

    #[staticmethod]
    fn surface(genus: usize) -> R<Self> {
        CorePresentation::surface(genus).map(Presentation).map_err(err)
    }

    #[getter]
    fn generators(&self) -> Vec<String> {
        self.0.generators().to_vec()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Presentation({:?})", self.0.to_string())
    }
}

fn representation(p: &Presentation, images: Vec<(f64, f64, f64, f64)>) -> R<Representation> {
    let images = images.into_iter().map(group).collect::<R<Vec<_>>>()?;
    Representation::new(&p.0, images).map_err(err)
}

fn connection_path(samples: Vec<PyRef<'_, Form>>) -> R<ConnectionPath> {
    ConnectionPath::new(samples.iter().map(|f| f.0.clone()).collect()).map_err(err)
}

// Chern–Simons action

#[pyfunction]
fn chern_simons(a: &Form) -> R<f64> {
    cs::cs(&a.0).map_err(err)
}

#[pyfunction]
fn dcs(a: &Form, eta: &Form) -> R<f64> {
    cs::dcs(&a.0, &eta.0).map_err(err)
}

/// `(integral, nearest integer)`.
#[pyfunction]
fn degree(u: &Gauge) -> R<(f64, i64)> {
    cs::degree(&u.0).map_err(err)
}

#[pyfunction]
fn gauge_shift(py: Python<'_>, a: &Form, u: &Gauge) -> R<Py<PyAny>> {
    to_py(py, &cs::gauge_shift(&a.0, &u.0).map_err(err)?)
}

#[pyfunction]
fn chern_weil_check(py: Python<'_>, a: &Form) -> R<Py<PyAny>> {
    to_py(py, &cs::chern_weil_check(&a.0).map_err(err)?)
}

// Gauge fields

#[pyfunction]
fn curvature(a: &Form) -> R<Form> {
    gauge::curvature(&a.0).map(Form).map_err(err)
}

#[pyfunction]
fn gauge_act(a: &Form, u: &Gauge) -> R<Form> {
    gauge::gauge_act(&a.0, &u.0).map(Form).map_err(err)
}

#[pyfunction]
fn flatness_residual(a: &Form) -> R<f64> {
    gauge::flatness_residual(&a.0).map_err(err)
}

/// `(flat connection, residual, iterations)`.
#[pyfunction]
#[pyo3(signature = (a, tol = 1e-10, max_iters = 2000))]
fn find_flat(py: Python<'_>, a: &Form, tol: f64, max_iters: usize) -> R<(Form, f64, usize)> {
    let a = a.0.clone();
    let found = py.detach(move || gauge::find_flat(&a, &FlatSearchOptions { tol, max_iters })).map_err(err)?;
    Ok((Form(found.connection), found.residual, found.iterations))
}

// Holonomy

/// Holonomy around `axis:k` through the origin or around a loop file.
#[pyfunction]
#[pyo3(signature = (a, loop_spec = "axis:0", steps = 256))]
fn holonomy(a: &Form, loop_spec: &str, steps: usize) -> R<(f64, f64, f64, f64)> {
    let dim = a.0.grid().dim();
    let gamma = match loop_spec.strip_prefix("axis:") {
        Some(k) => {
            let axis = k.parse().map_err(|_| CstkError::new_err(format!("bad axis in {loop_spec:?}")))?;
            LoopPath::axis_loop(&vec![0.0; dim], axis)
        }
        None => io::load_loop(loop_spec),
    }
    .map_err(err)?;
    cstk_core::holonomy::holonomy(&a.0, &gamma, steps).map(|g| quat(&g)).map_err(err)
}

/// Holonomies around the coordinate axes at the origin.
#[pyfunction]
#[pyo3(signature = (a, steps = 256))]
fn holonomy_rep(a: &Form, steps: usize) -> R<Vec<(f64, f64, f64, f64)>> {
    Ok(cstk_core::holonomy::holonomy_rep(&a.0, steps).map_err(err)?.iter().map(quat).collect())
}

// Representation varieties

/// Solves the relators from a Haar-random start; returns quaternions.
#[pyfunction]
#[pyo3(signature = (p, seed = 1))]
fn solve_representation(p: &Presentation, seed: u64) -> R<Vec<(f64, f64, f64, f64)>> {
    let start = rep::random_representation(&p.0, seed);
    let rho = rep::solve_representation(&p.0, &start, &rep::SolveOptions::default()).map_err(err)?;
    Ok(rho.images().iter().map(quat).collect())
}

#[pyfunction]
fn cohomology_dims(py: Python<'_>, p: &Presentation, images: Vec<(f64, f64, f64, f64)>) -> R<Py<PyAny>> {
    to_py(py, &rep::cohomology_dims(&p.0, &representation(p, images)?).map_err(err)?)
}

#[pyfunction]
fn restriction_image_dim(genus: usize, images: Vec<(f64, f64, f64, f64)>) -> R<usize> {
    let p = Presentation(CorePresentation::surface(genus).map_err(err)?);
    rep::restriction_image_dim(genus, &representation(&p, images)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (p, trials = 100, seed = 1))]
fn enumerate_components(py: Python<'_>, p: &Presentation, trials: usize, seed: u64) -> R<Py<PyAny>> {
    let pres = p.0.clone();
    let classes = py.detach(move || rep::enumerate_components(&pres, trials, seed)).map_err(err)?;
    to_py(py, &classes)
}

// Chern–Simons line bundle

#[pyfunction]
fn cocycle_residual(a: &Form, xi1: &Form, xi2: &Form) -> R<f64> {
    lines::cocycle_residual(&a.0, &xi1.0, &xi2.0).map_err(err)
}

#[pyfunction]
fn parallel_transport<'py>(py: Python<'py>, samples: Vec<PyRef<'py, Form>>) -> R<Bound<'py, PyComplex>> {
    Ok(complex(py, lines::parallel_transport(&connection_path(samples)?).map_err(err)?))
}

#[pyfunction]
fn cylinder_cs<'py>(py: Python<'py>, samples: Vec<PyRef<'py, Form>>) -> R<Bound<'py, PyComplex>> {
    Ok(complex(py, lines::cylinder_cs(&connection_path(samples)?).map_err(err)?))
}

#[pyfunction]
fn symplectic_form(eta1: &Form, eta2: &Form) -> R<f64> {
    lines::symplectic_form(&eta1.0, &eta2.0).map_err(err)
}

#[pyfunction]
fn moment_map(a: &Form, xi: &Form) -> R<f64> {
    lines::moment_map(&a.0, &xi.0).map_err(err)
}

// Spectral theory

fn operator(a: &AlgebraForm, name: &str) -> R<spectral::OperatorMatrix> {
    match name {
        "d" => spectral::assemble_d(a),
        "de-rham" => spectral::assemble_de_rham(a),
        "laplacian0" => spectral::assemble_laplacian(a, 0),
        "laplacian1" => spectral::assemble_laplacian(a, 1),
        other => return Err(CstkError::new_err(format!("unknown operator {other:?}"))),
    }
    .map_err(err)
}

/// Ascending eigenvalues: the whole spectrum, or the `count` nearest zero.
#[pyfunction]
#[pyo3(signature = (a, operator_name = "d", count = None))]
fn eigenvalues(py: Python<'_>, a: &Form, operator_name: &str, count: Option<usize>) -> R<Vec<f64>> {
    let op = operator(&a.0, operator_name)?;
    let mode = match count {
        Some(count) => EigenMode::NearZero { count, shift: 0.0 },
        None => EigenMode::Dense,
    };
    py.detach(move || spectral::eigen(&op, mode, false)).map(|r| r.values).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (samples, epsilon = None))]
fn spectral_flow(py: Python<'_>, samples: Vec<PyRef<'_, Form>>, epsilon: Option<f64>) -> R<Py<PyAny>> {
    let path: Vec<AlgebraForm> = samples.iter().map(|f| f.0.clone()).collect();
    let report = py.detach(move || spectral::spectral_flow(&path, epsilon)).map_err(err)?;
    to_py(py, &report)
}

/// Spectral flow along a straight segment, bisecting flagged steps.
#[pyfunction]
#[pyo3(signature = (start, end, samples = 17, max_samples = 400, epsilon = None))]
fn segment_flow(
    py: Python<'_>,
    start: &Form,
    end: &Form,
    samples: usize,
    max_samples: usize,
    epsilon: Option<f64>,
) -> R<Py<PyAny>> {
    let (a, b) = (start.0.clone(), end.0.clone());
    let flow = py.detach(move || spectral::segment_flow(&a, &b, samples, max_samples, epsilon)).map_err(err)?;
    to_py(py, &flow)
}

#[pyfunction]
fn discrete_eta(a: &Form, epsilon: f64) -> R<i64> {
    spectral::discrete_eta(&operator(&a.0, "d")?, epsilon).map_err(err)
}

/// `h_f` over the default disc family for `trace`, `quadratic` or `mixed`.
#[pyfunction]
#[pyo3(signature = (a, specimen = "trace"))]
fn perturbation_hf(a: &Form, specimen: &str) -> R<f64> {
    let f = TracePolynomial::specimen(specimen)
        .ok_or_else(|| CstkError::new_err(format!("unknown trace polynomial {specimen:?}")))?;
    spectral::perturbation_hf(&a.0, &DiscFamily::default(), &f).map_err(err)
}

#[pymodule]
fn cstk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("CstkError", py.get_type::<CstkError>())?;
    m.add("NonConvergenceError", py.get_type::<NonConvergenceError>())?;
    m.add_class::<Grid>()?;
    m.add_class::<Form>()?;
    m.add_class::<Gauge>()?;
    m.add_class::<Presentation>()?;
    m.add_function(wrap_pyfunction!(chern_simons, m)?)?;
    m.add_function(wrap_pyfunction!(dcs, m)?)?;
    m.add_function(wrap_pyfunction!(degree, m)?)?;
    m.add_function(wrap_pyfunction!(gauge_shift, m)?)?;
    m.add_function(wrap_pyfunction!(chern_weil_check, m)?)?;
    m.add_function(wrap_pyfunction!(curvature, m)?)?;
    m.add_function(wrap_pyfunction!(gauge_act, m)?)?;
    m.add_function(wrap_pyfunction!(flatness_residual, m)?)?;
    m.add_function(wrap_pyfunction!(find_flat, m)?)?;
    m.add_function(wrap_pyfunction!(holonomy, m)?)?;
    m.add_function(wrap_pyfunction!(holonomy_rep, m)?)?;
    m.add_function(wrap_pyfunction!(solve_representation, m)?)?;
    m.add_function(wrap_pyfunction!(cohomology_dims, m)?)?;
    m.add_function(wrap_pyfunction!(restriction_image_dim, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_components, m)?)?;
    m.add_function(wrap_pyfunction!(cocycle_residual, m)?)?;
    m.add_function(wrap_pyfunction!(parallel_transport, m)?)?;
    m.add_function(wrap_pyfunction!(cylinder_cs, m)?)?;
    m.add_function(wrap_pyfunction!(symplectic_form, m)?)?;
    m.add_function(wrap_pyfunction!(moment_map, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_flow, m)?)?;
    m.add_function(wrap_pyfunction!(segment_flow, m)?)?;
    m.add_function(wrap_pyfunction!(discrete_eta, m)?)?;
    m.add_function(wrap_pyfunction!(perturbation_hf, m)?)?;
    Ok(())
}
