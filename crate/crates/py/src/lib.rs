//! Python bindings: models, probes, the escape ladder and the recipe runner.
//! Reports come back as plain dicts/lists built from their JSON form.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use wfres::cli::{self, recipes, ExperimentConfig, Overrides};
use wfres::escape::{choose_constants, verify_transport, EscapeLadder, TransportGrid};
use wfres::geometry::{classify, KernelPoint};
use wfres::lattice::{Boundary, CapSpec, ModelSpec, Potential, PotentialForm, Stencil};
use wfres::propagate::{local_decay_probe, t_splitting_bound, EnergyCutoff};
use wfres::resolvent::{
    free_kernel_1d, lap_solve, wf_probe, Branch, Expectation, LapConfig, WfOptions,
};
use wfres::{Error, C64};

fn py_err(e: Error) -> PyErr {
    if e.is_schema() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any().unbind(),
            None => n
                .as_f64()
                .unwrap_or(f64::NAN)
                .into_pyobject(py)?
                .into_any()
                .unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(a) => {
            let items = a
                .iter()
                .map(|x| to_py(py, x))
                .collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any().unbind()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any().unbind()
        }
    })
}

fn report<T: serde::Serialize>(py: Python<'_>, x: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(x).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &v)
}

fn branch(s: &str) -> PyResult<Branch> {
    match s {
        "plus" => Ok(Branch::Plus),
        "minus" => Ok(Branch::Minus),
        _ => Err(PyValueError::new_err(format!(
            "branch must be 'plus' or 'minus', got '{s}'"
        ))),
    }
}

fn expectation(s: &str) -> PyResult<Expectation> {
    match s {
        "off" => Ok(Expectation::Off),
        "on" => Ok(Expectation::On),
        "any" => Ok(Expectation::Any),
        _ => Err(PyValueError::new_err(format!(
            "expectation must be off/on/any, got '{s}'"
        ))),
    }
}

/// Lattice model H = H₀ + V (+ absorbing layer) with the discrete Laplacian.
#[pyclass(name = "Model", from_py_object)]
#[derive(Clone)]
pub struct PyModel {
    spec: ModelSpec,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (dim=1, potential="power-law", amplitude=0.5, mu=0.5, periodic=false, cap=true))]
    fn new(
        dim: usize,
        potential: &str,
        amplitude: f64,
        mu: f64,
        periodic: bool,
        cap: bool,
    ) -> PyResult<Self> {
        if dim == 0 {
            return Err(PyValueError::new_err("dim must be at least 1"));
        }
        let potential = match potential {
            "zero" => Potential::Zero,
            "power-law" => {
                Potential::analytic(PotentialForm::PowerLaw, amplitude, mu).map_err(py_err)?
            }
            "dipole" => {
                Potential::analytic(PotentialForm::Dipole, amplitude, mu).map_err(py_err)?
            }
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown potential '{other}'"
                )))
            }
        };
        Ok(PyModel {
            spec: ModelSpec {
                stencil: Stencil::laplacian(dim),
                potential,
                cap: cap.then(CapSpec::default),
                boundary: if periodic {
                    Boundary::Periodic
                } else {
                    Boundary::Dirichlet
                },
            },
        })
    }

    /// p₀ = 1 − cos ξ, V = 0.
    #[staticmethod]
    fn free_1d() -> Self {
        PyModel {
            spec: ModelSpec::free_1d(),
        }
    }

    /// p₀ = 1 − cos ξ, V(n) = 0.5 (1 + n²)^{−1/4}.
    #[staticmethod]
    fn reference_1d() -> Self {
        PyModel {
            spec: ModelSpec::reference_1d(),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn p0(&self, xi: Vec<f64>) -> f64 {
        self.spec.stencil.p0(&xi)
    }

    fn velocity(&self, xi: Vec<f64>) -> Vec<f64> {
        self.spec.stencil.velocity(&xi)
    }

    /// Potential values on the box of the given radius.
    fn potential_values(&self, radius: usize) -> PyResult<Vec<f64>> {
        Ok(self
            .spec
            .hermitian(radius)
            .map_err(py_err)?
            .potential_values()
            .to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(dim={}, potential={:?}, cap={})",
            self.spec.dim(),
            self.spec.potential,
            self.spec.cap.is_some()
        )
    }
}

/// Closed-form free kernel (H₀ − λ ∓ i0)^{-1}(n, 0) in d = 1.
#[pyfunction]
#[pyo3(signature = (lam, n, branch_name="plus"))]
fn free_kernel(lam: f64, n: i64, branch_name: &str) -> PyResult<(f64, f64)> {
    let k = free_kernel_1d(lam, branch(branch_name)?, n).map_err(py_err)?;
    Ok((k.re, k.im))
}

/// Limiting-absorption column R(λ ± i0)δ₀ on a box; returns (values, ε*).
#[pyfunction]
#[pyo3(signature = (model, radius, lam, branch_name="plus", tol=1e-6))]
fn lap_column(
    model: &PyModel,
    radius: usize,
    lam: f64,
    branch_name: &str,
    tol: f64,
) -> PyResult<(Vec<(f64, f64)>, f64)> {
    let h = Arc::new(model.spec.hamiltonian(radius).map_err(py_err)?);
    let bx = h.lattice_box();
    let mut rhs = vec![C64::new(0.0, 0.0); bx.len()];
    let origin = vec![0; bx.dim];
    rhs[bx.index(&origin).expect("origin is in the box")] = C64::new(1.0, 0.0);
    let cfg = LapConfig::new(lam, branch(branch_name)?).with_tol(tol);
    let sol = lap_solve(&h, &cfg, &rhs).map_err(py_err)?;
    Ok((sol.u.iter().map(|z| (z.re, z.im)).collect(), sol.epsilon))
}

/// Membership of ((x, ξ), (y, η)) in the sets Σ₀, Σ±, Σ'±.
#[pyfunction]
#[pyo3(signature = (model, x, xi, y, eta, lam=1.0, tol=0.05))]
#[allow(clippy::too_many_arguments)]
fn classify_point(
    py: Python<'_>,
    model: &PyModel,
    x: Vec<f64>,
    xi: Vec<f64>,
    y: Vec<f64>,
    eta: Vec<f64>,
    lam: f64,
    tol: f64,
) -> PyResult<Py<PyAny>> {
    let kp = KernelPoint::new(x, xi, y, eta).map_err(py_err)?;
    let r = classify(&kp, &model.spec.stencil, lam, tol).map_err(py_err)?;
    report(py, &r)
}

/// Semiclassical sandwich norms over an h sweep, with the log-log fit.
#[pyfunction]
#[pyo3(signature = (model, x, xi, y, eta, h_list, delta1, delta2, lam=1.0, expect="off"))]
#[allow(clippy::too_many_arguments)]
fn wf(
    py: Python<'_>,
    model: &PyModel,
    x: Vec<f64>,
    xi: Vec<f64>,
    y: Vec<f64>,
    eta: Vec<f64>,
    h_list: Vec<f64>,
    delta1: f64,
    delta2: f64,
    lam: f64,
    expect: &str,
) -> PyResult<Py<PyAny>> {
    let kp = KernelPoint::new(x, xi, y, eta).map_err(py_err)?;
    let opts = WfOptions {
        expectation: expectation(expect)?,
        ..WfOptions::default()
    };
    let spec = model.spec.clone();
    let p = py
        .detach(move || wf_probe(&spec, &kp, lam, &h_list, delta1, delta2, &opts))
        .map_err(py_err)?;
    report(py, &p)
}

/// ‖⟨n⟩^{−ν} e^{−itH} f(H) ⟨n⟩^{−ν}‖ along the given times.
#[pyfunction]
#[pyo3(signature = (model, times, radius, nu=3.0, lam=1.0, eps_f=0.2))]
fn local_decay(
    py: Python<'_>,
    model: &PyModel,
    times: Vec<f64>,
    radius: usize,
    nu: f64,
    lam: f64,
    eps_f: f64,
) -> PyResult<Py<PyAny>> {
    let cut = EnergyCutoff::new(lam, eps_f).map_err(py_err)?;
    let spec = model.spec.clone();
    let p = py
        .detach(move || local_decay_probe(&spec, &cut, nu, &times, radius))
        .map_err(py_err)?;
    report(py, &p)
}

#[pyfunction]
fn t_splitting(
    py: Python<'_>,
    slope_prop: f64,
    kappa: f64,
    nu: f64,
    m: f64,
) -> PyResult<Py<PyAny>> {
    report(
        py,
        &t_splitting_bound(slope_prop, kappa, nu, m).map_err(py_err)?,
    )
}

/// Transport check for ψ_j of a 1-D ladder around (x₂, ξ₂).
#[pyfunction]
#[pyo3(signature = (x2, xi2, delta1, delta2, h, j, depth=2, mu=0.5, safety=2.0))]
#[allow(clippy::too_many_arguments)]
fn transport(
    py: Python<'_>,
    x2: f64,
    xi2: f64,
    delta1: f64,
    delta2: f64,
    h: f64,
    j: usize,
    depth: usize,
    mu: f64,
    safety: f64,
) -> PyResult<Py<PyAny>> {
    let mut l = EscapeLadder::new(
        Stencil::laplacian(1),
        vec![x2],
        vec![xi2],
        delta1,
        delta2,
        h,
        mu,
    )
    .map_err(py_err)?
    .with_depth(depth);
    choose_constants(&mut l, &vec![1.0; depth], safety).map_err(py_err)?;
    let r = verify_transport(&l, j, &TransportGrid::default()).map_err(py_err)?;
    report(py, &r)
}

#[pyfunction]
fn invariant_suite(py: Python<'_>) -> PyResult<Py<PyAny>> {
    let r = py
        .detach(wfres::invariants::run_invariant_suite)
        .map_err(py_err)?;
    report(py, &r)
}

/// (name, description, claim) for every canned recipe.
#[pyfunction]
fn list_recipes() -> Vec<(String, String, String)> {
    cli::RECIPES
        .iter()
        .map(|r| (r.name.into(), r.description.into(), r.claim.into()))
        .collect()
}

/// Runs a recipe name or a TOML path; returns the CLI exit code.
#[pyfunction]
#[pyo3(signature = (config, out=None, seed=None))]
fn run(py: Python<'_>, config: &str, out: Option<PathBuf>, seed: Option<u64>) -> i32 {
    let ov = Overrides {
        out,
        seed,
        jobs: None,
    };
    let config = config.to_string();
    py.detach(move || {
        let (cfg, label) = match recipes::find(&config) {
            Some(r) => (ExperimentConfig::from_toml(r.config), r.name.to_string()),
            None => (cli::load_config(config.as_ref()), config.clone()),
        };
        cli::exit_code(&cfg.and_then(|c| cli::run(&c, &label, &ov)))
    })
}

#[pymodule]
fn pywfres(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(free_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(lap_column, m)?)?;
    m.add_function(wrap_pyfunction!(classify_point, m)?)?;
    m.add_function(wrap_pyfunction!(wf, m)?)?;
    m.add_function(wrap_pyfunction!(local_decay, m)?)?;
    m.add_function(wrap_pyfunction!(t_splitting, m)?)?;
    m.add_function(wrap_pyfunction!(transport, m)?)?;
    m.add_function(wrap_pyfunction!(invariant_suite, m)?)?;
    m.add_function(wrap_pyfunction!(list_recipes, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_and_expectation_parsing() {
        assert_eq!(branch("plus").unwrap(), Branch::Plus);
        assert_eq!(expectation("on").unwrap(), Expectation::On);
    }

    #[test]
    fn recipe_index_is_complete() {
        let r = list_recipes();
        assert!(r.len() >= 8);
        assert!(r.iter().any(|x| x.0 == "free-wf-offset"));
    }
}
