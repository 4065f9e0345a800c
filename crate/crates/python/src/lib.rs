//! Python bindings: manifolds, maps, sections, energies, index forms,
//! verdicts, the flow and the scenario runner.

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DVector;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use alpha_harmonic::energy::{alpha_energy, tension_report};
use alpha_harmonic::fields::{classify_field, MapField, Polynomial, Section, SourceScalar};
use alpha_harmonic::geometry::{ManifoldBackend, TorusMetric, DEFAULT_MC_SEED};
use alpha_harmonic::lab::{self, phase_cell, Experiment, RunOptions, ScenarioConfig};
use alpha_harmonic::optimize::{self, DEFAULT_MAX_ITER};
use alpha_harmonic::spectral::function_spectrum;
use alpha_harmonic::stability::{
    conformal_instability_coefficient, einstein_threshold_claimed, index_form, stability_verdict,
    yano_check,
};

fn err(e: alpha_harmonic::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serializable value → plain Python objects.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(PyModule::import(py, "json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "Manifold", module = "alpha_harmonic_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyManifold {
    inner: Arc<ManifoldBackend>,
}

#[pymethods]
impl PyManifold {
    #[staticmethod]
    #[pyo3(signature = (m, resolution = 10))]
    fn sphere(m: usize, resolution: usize) -> PyResult<Self> {
        let inner = ManifoldBackend::build_sphere(m, resolution).map_err(err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[staticmethod]
    #[pyo3(signature = (m, samples = 1000, seed = DEFAULT_MC_SEED))]
    fn sphere_monte_carlo(m: usize, samples: usize, seed: u64) -> PyResult<Self> {
        let inner = ManifoldBackend::build_sphere_monte_carlo(m, samples, seed).map_err(err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[staticmethod]
    #[pyo3(signature = (m, n_per_axis = 16, metric = "flat", params = vec![]))]
    fn torus(m: usize, n_per_axis: usize, metric: &str, params: Vec<f64>) -> PyResult<Self> {
        let metric = TorusMetric::from_id(metric, &params).map_err(err)?;
        let inner = ManifoldBackend::build_torus(m, n_per_axis, metric).map_err(err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn is_sphere(&self) -> bool {
        self.inner.is_sphere()
    }

    #[getter]
    fn volume(&self) -> f64 {
        self.inner.total_weight()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Quadrature nodes in ambient (sphere) or chart (torus) coordinates.
    fn nodes(&self) -> Vec<Vec<f64>> {
        self.inner.nodes().iter().map(|p| p.iter().copied().collect()).collect()
    }

    /// Smallest `count` Laplace eigenvalues with multiplicities.
    #[pyo3(signature = (count = 3))]
    fn spectrum(&self, py: Python<'_>, count: usize) -> PyResult<Py<PyAny>> {
        to_py(py, &function_spectrum(&self.inner, count).map_err(err)?)
    }

    fn __repr__(&self) -> String {
        let kind = if self.inner.is_sphere() { "S" } else { "T" };
        format!("Manifold({kind}^{}, {} nodes)", self.inner.dim(), self.inner.len())
    }
}

#[pyclass(name = "Map", module = "alpha_harmonic_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMap {
    inner: Arc<MapField>,
}

#[pymethods]
impl PyMap {
    #[staticmethod]
    fn identity(manifold: &PyManifold) -> Self {
        Self {
            inner: Arc::new(MapField::identity(manifold.inner.clone())),
        }
    }

    #[staticmethod]
    fn constant(source: &PyManifold, target: &PyManifold, point: Vec<f64>) -> PyResult<Self> {
        let map = MapField::constant(source.inner.clone(), target.inner.clone(), DVector::from_vec(point))
            .map_err(err)?;
        Ok(Self { inner: Arc::new(map) })
    }

    /// Catalog map by name: identity, constant, equator_inclusion,
    /// torus_linear, torus_wiggle, circle_loop.
    #[staticmethod]
    #[pyo3(signature = (kind, source, target, params = vec![]))]
    fn catalog(kind: &str, source: &PyManifold, target: &PyManifold, params: Vec<f64>) -> PyResult<Self> {
        let map = MapField::from_catalog(kind, &params, source.inner.clone(), target.inner.clone())
            .map_err(err)?;
        Ok(Self { inner: Arc::new(map) })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind_id()
    }

    #[getter]
    fn source(&self) -> PyManifold {
        PyManifold {
            inner: self.inner.source().clone(),
        }
    }

    #[getter]
    fn target(&self) -> PyManifold {
        PyManifold {
            inner: self.inner.target().clone(),
        }
    }

    fn values(&self) -> Vec<Vec<f64>> {
        self.inner.values().iter().map(|p| p.iter().copied().collect()).collect()
    }

    fn energy(&self, alpha: f64) -> PyResult<f64> {
        Ok(alpha_energy(&self.inner, alpha).map_err(err)?.value)
    }

    /// Norms of `τ` and `τ_α` plus the α-harmonic flag.
    fn tension<'py>(&self, py: Python<'py>, alpha: f64) -> PyResult<Bound<'py, PyDict>> {
        let r = tension_report(&self.inner, alpha).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("tension_l2", r.tension_l2)?;
        d.set_item("tension_sup", r.tension_sup)?;
        d.set_item("alpha_tension_l2", r.alpha_tension_l2)?;
        d.set_item("alpha_tension_sup", r.alpha_tension_sup)?;
        d.set_item("alpha_harmonic", r.alpha_harmonic)?;
        Ok(d)
    }

    #[pyo3(signature = (alpha, degree = 2))]
    fn stability_verdict(&self, py: Python<'_>, alpha: f64, degree: u32) -> PyResult<Py<PyAny>> {
        to_py(py, &stability_verdict(&self.inner, alpha, degree).map_err(err)?)
    }

    /// Armijo descent of `E_α`; returns the log and the terminal values.
    #[pyo3(signature = (alpha, tol = 1e-6, max_iter = DEFAULT_MAX_ITER))]
    fn flow<'py>(&self, py: Python<'py>, alpha: f64, tol: f64, max_iter: usize) -> PyResult<Bound<'py, PyDict>> {
        let trace = optimize::flow(&self.inner, alpha, tol, max_iter).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("reason", format!("{:?}", trace.reason).to_lowercase())?;
        d.set_item("steps", trace.steps())?;
        d.set_item("final_energy", trace.final_energy())?;
        d.set_item("final_tension", trace.final_tension())?;
        d.set_item("log", to_py(py, &trace.log)?)?;
        d.set_item("terminal", PyMap { inner: trace.terminal.clone() })?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Map({}, {} nodes)", self.inner.kind_id(), self.inner.source().len())
    }
}

#[pyclass(name = "Field", module = "alpha_harmonic_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyField {
    inner: Section,
}

#[pymethods]
impl PyField {
    /// Projection of the constant ambient vector `a`.
    #[staticmethod]
    fn conformal(map: &PyMap, a: Vec<f64>) -> PyResult<Self> {
        let inner = Section::conformal(map.inner.clone(), DVector::from_vec(a)).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn killing_rotation(map: &PyMap, i: usize, j: usize) -> PyResult<Self> {
        let inner = Section::killing_rotation(map.inner.clone(), i, j).map_err(err)?;
        Ok(Self { inner })
    }

    /// Gradient of the linear function `⟨a, x⟩`.
    #[staticmethod]
    fn gradient_linear(map: &PyMap, a: Vec<f64>) -> PyResult<Self> {
        let inner = Section::gradient(map.inner.clone(), Polynomial::linear(&a)).map_err(err)?;
        Ok(Self { inner })
    }

    /// Gradient of the zonal spherical harmonic of degree `k`.
    #[staticmethod]
    fn gradient_zonal(map: &PyMap, k: u32) -> PyResult<Self> {
        let vars = map.inner.target().ambient_dim();
        let inner = Section::gradient(map.inner.clone(), Polynomial::zonal_harmonic(vars, k)).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn constant(map: &PyMap, c: Vec<f64>) -> PyResult<Self> {
        let inner = Section::constant(map.inner.clone(), DVector::from_vec(c)).map_err(err)?;
        Ok(Self { inner })
    }

    /// `cos` or `sin(2π k·x)` times the unit vector `e_axis` (torus sources).
    #[staticmethod]
    #[pyo3(signature = (map, k, axis, sine = false))]
    fn fourier(map: &PyMap, k: Vec<i64>, axis: usize, sine: bool) -> PyResult<Self> {
        let dim = map.inner.target().ambient_dim();
        if axis >= dim {
            return Err(PyValueError::new_err(format!("axis {axis} out of range")));
        }
        let mut dir = DVector::zeros(dim);
        dir[axis] = 1.0;
        let inner = Section::scaled(map.inner.clone(), SourceScalar::Fourier { k, sine }, dir).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn map(&self) -> PyMap {
        PyMap {
            inner: self.inner.base().clone(),
        }
    }

    fn values(&self) -> Vec<Vec<f64>> {
        self.inner.sample().iter().map(|v| v.iter().copied().collect()).collect()
    }

    /// `I_α(self, other)`; `other` defaults to `self`.
    #[pyo3(signature = (alpha, other = None))]
    fn index_form(&self, alpha: f64, other: Option<&PyField>) -> PyResult<f64> {
        let w = other.map_or(&self.inner, |o| &o.inner);
        index_form(self.inner.base(), alpha, &self.inner, w).map_err(err)
    }

    /// `(lhs, rhs)` of Yano's integral formula.
    fn yano(&self) -> PyResult<(f64, f64)> {
        yano_check(&self.inner).map_err(err)
    }

    /// `"killing"`, `"conformal"` or `"generic"` with residuals.
    fn classify<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = classify_field(&self.inner).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("class", format!("{:?}", c.class).to_lowercase())?;
        d.set_item("killing_residual", c.killing_residual)?;
        d.set_item("conformal_residual", c.conformal_residual)?;
        Ok(d)
    }
}

/// `(2αm + 2 − m − m², 2α(1+m)^{α−2}/m)`.
#[pyfunction(name = "conformal_instability_coefficient")]
fn py_conformal_instability_coefficient(m: usize, alpha: f64) -> (f64, f64) {
    conformal_instability_coefficient(m, alpha)
}

/// Stated Einstein threshold: `(threshold, stable)`.
#[pyfunction(name = "einstein_threshold")]
fn py_einstein_threshold(lambda_: f64, mu1: f64, m: usize, alpha: f64) -> (f64, bool) {
    let c = einstein_threshold_claimed(lambda_, mu1, m, alpha);
    (c.threshold, c.stable)
}

/// One cell of the sphere-identity phase diagram.
#[pyfunction(name = "phase_cell")]
#[pyo3(signature = (m, alpha, degree = 2, resolution = 8))]
fn py_phase_cell<'py>(
    py: Python<'py>,
    m: usize,
    alpha: f64,
    degree: u32,
    resolution: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let c = phase_cell(m, alpha, degree, resolution).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("m", c.m)?;
    d.set_item("alpha", c.alpha)?;
    d.set_item("conformal_coeff", c.conformal_coeff)?;
    d.set_item("einstein_threshold", c.einstein_threshold)?;
    d.set_item("einstein_claims_stable", c.einstein_claims_stable)?;
    d.set_item("record", to_py(py, &c.record)?)?;
    Ok(d)
}

/// Runs a TOML scenario and writes its outputs; returns the manifest.
#[pyfunction]
#[pyo3(signature = (config, out_dir, experiment = None, seed = None, threads = 0))]
fn run_scenario(
    py: Python<'_>,
    config: &str,
    out_dir: PathBuf,
    experiment: Option<&str>,
    seed: Option<u64>,
    threads: usize,
) -> PyResult<Py<PyAny>> {
    let cfg = ScenarioConfig::parse(config).map_err(err)?;
    let experiment = experiment
        .map(|name| {
            Experiment::from_name(name)
                .ok_or_else(|| PyValueError::new_err(format!("unknown experiment `{name}`")))
        })
        .transpose()?;
    let opts = RunOptions {
        out_dir,
        seed,
        threads,
        experiment,
        ..RunOptions::default()
    };
    to_py(py, &lab::run_config(cfg, config, &opts).map_err(err)?)
}

#[pymodule]
fn alpha_harmonic_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyManifold>()?;
    m.add_class::<PyMap>()?;
    m.add_class::<PyField>()?;
    m.add_function(wrap_pyfunction!(py_conformal_instability_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(py_einstein_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(py_phase_cell, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
