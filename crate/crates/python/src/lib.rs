//! Python bindings: hierarchy models, operators, oracles, the solver and the
//! config-driven experiment runner.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use scale_picard::config::ExperimentConfig;
use scale_picard::kimura::{
    evolution_u, kimura_setup, CorrelationHierarchy, DiscreteSpace, KimuraEvolution, KimuraModel as Model,
    Layout, RateData, Slope,
};
use scale_picard::oracles::{bound_verifier, bruteforce_oracle, evolution_laws, poisson_oracle};
use scale_picard::scale::{Radius, ScaleWindow};
use scale_picard::solver::{picard_solve, SolverSettings};
use scale_picard::Error;

create_exception!(scalepicard, SolverError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config { .. } | Error::Domain(_) | Error::Model(_) | Error::MalformedConfiguration(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => SolverError::new_err(other.to_string()),
    }
}

/// Serializes through JSON into plain Python objects.
fn to_object<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| SolverError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_object<T: serde::de::DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Mutation space, rates and truncation level of a correlation hierarchy.
///
/// `rates` is a dict `{"h": {...}, "psi": {...}, "a": {...}}` in the config-file
/// format; omitted, the constant rates `h`, `psi`, `a` are used.
#[pyclass(name = "KimuraModel", frozen)]
struct PyKimuraModel {
    inner: Arc<Model>,
}

impl PyKimuraModel {
    fn hierarchy(&self, k: Vec<f64>) -> PyResult<CorrelationHierarchy> {
        self.inner.hierarchy(k).map_err(to_py)
    }
}

#[pymethods]
impl PyKimuraModel {
    #[new]
    #[pyo3(signature = (weights, n_max, horizon=1.0, rates=None, h=0.0, psi=0.0, a=0.0))]
    fn new(
        weights: Vec<f64>,
        n_max: usize,
        horizon: f64,
        rates: Option<&Bound<'_, PyAny>>,
        h: f64,
        psi: f64,
        a: f64,
    ) -> PyResult<Self> {
        let rates = match rates {
            Some(r) => from_object::<RateData>(r)?,
            None => RateData::constant(h, psi, a),
        };
        let space = DiscreteSpace::new(weights).map_err(to_py)?;
        let inner = Model::new(space, rates, n_max, horizon).map_err(to_py)?;
        Ok(PyKimuraModel { inner: Arc::new(inner) })
    }

    #[getter]
    fn sites(&self) -> usize {
        self.inner.space().sites()
    }

    #[getter]
    fn n_max(&self) -> usize {
        self.inner.n_max()
    }

    /// Configuration labels such as `"{1,3}"` in storage order.
    fn labels(&self) -> Vec<String> {
        self.inner.layout().masks().iter().map(|&m| Layout::label(m)).collect()
    }

    /// Product hierarchy `k(eta) = prod rho_i`.
    fn poisson(&self, density: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.poisson(&density).map_err(to_py)?.into_values())
    }

    /// `Phi(t, eta)` for 0-based sites.
    fn selection_cost(&self, t: f64, sites: Vec<usize>) -> PyResult<f64> {
        self.inner.selection_cost(t, &sites).map_err(to_py)
    }

    fn apply_a0(&self, t: f64, k: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.apply_a0(t, &self.hierarchy(k)?).map_err(to_py)?.into_values())
    }

    fn apply_a1(&self, t: f64, k: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.apply_a1(t, &self.hierarchy(k)?).map_err(to_py)?.into_values())
    }

    fn bdelta(&self, t: f64, k: Vec<f64>) -> PyResult<f64> {
        self.inner.bdelta(t, &self.hierarchy(k)?).map_err(to_py)
    }

    fn apply_ldelta(&self, t: f64, k: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.apply_ldelta(t, &self.hierarchy(k)?).map_err(to_py)?.into_values())
    }

    /// `U(t, s) k` for the evolution generated by `-A0`.
    #[pyo3(signature = (t, s, k, alpha_top=1.0))]
    fn evolve(&self, py: Python<'_>, t: f64, s: f64, k: Vec<f64>, alpha_top: f64) -> PyResult<Vec<f64>> {
        let k = self.hierarchy(k)?;
        let model = self.inner.clone();
        py.detach(|| {
            let ev = KimuraEvolution::new(model, alpha_top);
            evolution_u(&ev, t, s, &k).map(|v| v.into_values())
        })
        .map_err(to_py)
    }

    fn poisson_oracle(&self, rho0: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        Ok(poisson_oracle(&self.inner, &rho0, t).map_err(to_py)?.into_values())
    }

    /// Direct RK4 integration of the nonlinear hierarchy; returns a dict with
    /// `times`, `values` and the step-halving diagnostics.
    fn bruteforce<'py>(&self, py: Python<'py>, k0: Vec<f64>, t_end: f64, steps: usize) -> PyResult<Bound<'py, PyAny>> {
        let k0 = self.hierarchy(k0)?;
        let model = self.inner.clone();
        let traj = py.detach(|| bruteforce_oracle(&model, &k0, t_end, steps)).map_err(to_py)?;
        to_object(py, &traj)
    }
}

/// The scale window. `lambda_` is only used by a fixed-slope solve.
#[pyclass(name = "ScaleWindow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScaleWindow {
    inner: ScaleWindow,
}

#[pymethods]
impl PyScaleWindow {
    #[new]
    #[pyo3(signature = (alpha_star, alpha0, alpha_top, gamma, radius, horizon, lambda_=1.0))]
    fn new(alpha_star: f64, alpha0: f64, alpha_top: f64, gamma: f64, radius: f64, horizon: f64, lambda_: f64) -> PyResult<Self> {
        let inner = ScaleWindow::new(alpha_star, alpha0, alpha_top, 0.0, gamma, lambda_, Radius::Finite(radius), horizon)
            .map_err(to_py)?;
        Ok(PyScaleWindow { inner })
    }

    fn solution_horizon(&self) -> f64 {
        self.inner.solution_horizon()
    }

    fn __repr__(&self) -> String {
        let w = &self.inner;
        format!(
            "ScaleWindow(alpha_star={}, alpha0={}, alpha_top={}, gamma={}, radius={}, horizon={}, lambda_={})",
            w.alpha_star,
            w.alpha0,
            w.alpha_top,
            w.gamma,
            w.radius.value(),
            w.horizon,
            w.lambda
        )
    }
}

fn slope(lambda_: Option<f64>, factor: f64) -> Slope {
    lambda_.map_or(Slope::Auto(factor), Slope::Fixed)
}

/// Solves the hierarchy from `k0`. Returns `(times, values, report)`, where
/// `report` holds the threshold terms, increments, ratios and the tail bound.
#[pyfunction]
#[pyo3(signature = (model, k0, window, lambda_=None, factor=2.0, settings=None))]
fn solve<'py>(
    py: Python<'py>,
    model: &PyKimuraModel,
    k0: Vec<f64>,
    window: &PyScaleWindow,
    lambda_: Option<f64>,
    factor: f64,
    settings: Option<&Bound<'py, PyDict>>,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Bound<'py, PyAny>)> {
    let settings: SolverSettings = match settings {
        Some(s) => from_object(s.as_any())?,
        None => SolverSettings::default(),
    };
    let k0 = model.hierarchy(k0)?;
    let m = model.inner.clone();
    let w = window.inner;
    let (u, rep) = py
        .detach(|| {
            let setup = kimura_setup(m, &k0, &w, slope(lambda_, factor))?;
            picard_solve(&setup.problem, &setup.window, &settings)
        })
        .map_err(to_py)?;
    let times = u.times().to_vec();
    Ok((times, u.into_values(), to_object(py, &rep)?))
}

/// Samples every operator bound and the evolution laws; returns a dict with
/// `bounds` and `evolution` reports.
#[pyfunction]
#[pyo3(signature = (model, k0, window, samples=100, seed=42))]
fn verify<'py>(
    py: Python<'py>,
    model: &PyKimuraModel,
    k0: Vec<f64>,
    window: &PyScaleWindow,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let k0 = model.hierarchy(k0)?;
    let m = model.inner.clone();
    let w = window.inner;
    let (bounds, laws) = py
        .detach(|| -> scale_picard::Result<_> {
            let s = kimura_setup(m.clone(), &k0, &w, Slope::default())?;
            let b = bound_verifier(&m, &s.window, &k0, &s.problem.constants, &s.evolution, samples, seed)?;
            let l = evolution_laws(&m, &s.window, &s.evolution, samples, seed)?;
            Ok((b, l))
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("bounds", to_object(py, &bounds)?)?;
    out.set_item("evolution", to_object(py, &laws)?)?;
    Ok(out.into_any())
}

/// A parsed experiment config (the same JSON format the CLI reads).
#[pyclass(name = "Experiment", frozen)]
struct PyExperiment {
    config: ExperimentConfig,
}

#[pymethods]
impl PyExperiment {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyExperiment {
            config: ExperimentConfig::from_json(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyExperiment {
            config: ExperimentConfig::load(&path).map_err(to_py)?.config,
        })
    }

    fn model(&self) -> PyResult<PyKimuraModel> {
        Ok(PyKimuraModel {
            inner: Arc::new(self.config.model().map_err(to_py)?),
        })
    }

    fn initial(&self) -> PyResult<Vec<f64>> {
        let m = self.config.model().map_err(to_py)?;
        Ok(m.poisson(&self.config.initial_density().map_err(to_py)?).map_err(to_py)?.into_values())
    }

    /// `(times, values, report)` with the config's slope, overrides and settings.
    fn solve<'py>(&self, py: Python<'py>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Bound<'py, PyAny>)> {
        let cfg = &self.config;
        let (u, rep) = py
            .detach(|| {
                let (setup, _) = cfg.setup()?;
                picard_solve(&setup.problem, &setup.window, &cfg.solver)
            })
            .map_err(to_py)?;
        let times = u.times().to_vec();
        Ok((times, u.into_values(), to_object(py, &rep)?))
    }
}

#[pymodule]
fn scalepicard(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKimuraModel>()?;
    m.add_class::<PyScaleWindow>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    Ok(())
}
