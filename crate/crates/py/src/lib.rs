//! Python bindings for the core crate.

use std::collections::HashMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use tricolor::graph;
use tricolor::linalg::Vectors;
use tricolor::pipeline::{self, ColorConfig, ExperimentConfig};
use tricolor::rounding::{self, ThresholdParams};
use tricolor::vector_coloring::VectorColoring;
use tricolor::{params, sos, Error};

create_exception!(pytricolor, PreconditionError, PyException);
create_exception!(pytricolor, NotThreeColorableError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Precondition(_) | Error::PreconditionViolated { .. } | Error::PruneExhausted { .. } => {
            PreconditionError::new_err(e.to_string())
        }
        Error::NotThreeColorable { .. } => NotThreeColorableError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Graph", module = "pytricolor", frozen)]
struct PyGraph {
    inner: graph::Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(PyGraph { inner: graph::Graph::from_edges(n, &edges).map_err(to_py)? })
    }

    /// Parses the `p n m` / `e u v` / `c v col` text format; returns the
    /// graph and the planted colors when present.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<(Self, Option<Vec<u8>>)> {
        let (g, planted) = graph::Graph::read_text(text.as_bytes()).map_err(to_py)?;
        Ok((PyGraph { inner: g }, planted))
    }

    fn to_text(&self, planted: Option<Vec<u8>>) -> String {
        self.inner.to_text(planted.as_deref())
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().collect()
    }

    fn neighbors(&self, i: usize) -> PyResult<Vec<usize>> {
        self.inner.check_vertex(i).map_err(to_py)?;
        Ok(self.inner.neighbors(i).to_vec())
    }

    fn max_degree(&self) -> usize {
        self.inner.max_degree()
    }

    fn is_independent(&self, set: Vec<usize>) -> bool {
        graph::is_independent_set(&self.inner, &set)
    }

    fn greedy_colors(&self) -> usize {
        graph::greedy_coloring(&self.inner).num_colors()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, m={})", self.inner.n(), self.inner.edge_count())
    }
}

fn vectors(rows: &[Vec<f64>]) -> PyResult<Vectors> {
    Vectors::from_rows(rows).map_err(to_py)
}

fn rows(v: &Vectors) -> Vec<Vec<f64>> {
    (0..v.len()).map(|i| v.row(i).to_vec()).collect()
}

fn coloring(g: &PyGraph, v: &[Vec<f64>], kappa: f64) -> PyResult<VectorColoring> {
    VectorColoring::new(&g.inner, (0..g.inner.n()).collect(), vectors(v)?, kappa).map_err(to_py)
}

/// Planted 3-colorable graph with expected degree `degree`.
#[pyfunction]
#[pyo3(signature = (n, degree, seed=0, weights=None))]
fn generate_planted(n: usize, degree: f64, seed: u64, weights: Option<[f64; 3]>) -> PyResult<(PyGraph, Vec<u8>)> {
    let p = graph::edge_prob_for_degree(n, degree);
    let inst = graph::generate_planted(n, weights.unwrap_or([1.0 / 3.0; 3]), p, seed).map_err(to_py)?;
    Ok((PyGraph { inner: inst.graph }, inst.planted))
}

/// Unit vectors with `v_u . v_v = -1/2` across the planted classes.
#[pyfunction]
fn planted_simplex(colors: Vec<u8>) -> Vec<Vec<f64>> {
    rows(&sos::planted_simplex(&colors).vectors)
}

/// Low-rank vector coloring; returns `(vectors, achieved_kappa, converged)`.
#[pyfunction]
#[pyo3(signature = (g, kappa=3.0, dim=3, seed=0, tol=1e-9, max_sweeps=400))]
fn solve_sdp(g: &PyGraph, kappa: f64, dim: usize, seed: u64, tol: f64, max_sweeps: usize) -> PyResult<(Vec<Vec<f64>>, f64, bool)> {
    let s = sos::solve_vector_coloring_lowrank(&g.inner, kappa, dim, tol, max_sweeps, seed).map_err(to_py)?;
    Ok((rows(&s.vectors), s.achieved_kappa(&g.inner), s.report.converged))
}

/// KMS threshold `sqrt(2 (k-2)/k ln d)`.
#[pyfunction]
fn kms_threshold(kappa: f64, delta: f64) -> PyResult<f64> {
    Ok(rounding::kms_threshold(kappa, delta).map_err(to_py)?.t)
}

/// Threshold with tail mass `d^(-1/(3(1+c)))`.
#[pyfunction]
fn inefficient_threshold(c: f64, delta: f64) -> PyResult<f64> {
    Ok(rounding::inefficient_threshold(c, delta).map_err(to_py)?.t)
}

/// One KMS draw at threshold `t`; returns the independent set.
#[pyfunction]
#[pyo3(signature = (g, vectors, t, seed=0, kappa=3.0))]
fn kms_round(g: &PyGraph, vectors: Vec<Vec<f64>>, t: f64, seed: u64, kappa: f64) -> PyResult<Vec<usize>> {
    let vc = coloring(g, &vectors, kappa)?;
    Ok(rounding::kms_round_with(&g.inner, &vc, t, seed).map_err(to_py)?.returned)
}

/// One KMS' draw at threshold `t`; returns the independent set.
#[pyfunction]
#[pyo3(signature = (g, vectors, t, seed=0, kappa=3.0))]
fn kms_prime_round(g: &PyGraph, vectors: Vec<Vec<f64>>, t: f64, seed: u64, kappa: f64) -> PyResult<Vec<usize>> {
    let vc = coloring(g, &vectors, kappa)?;
    let out = rounding::kms_prime_round(&g.inner, &vc, &ThresholdParams::explicit(t), seed).map_err(to_py)?;
    Ok(out.returned)
}

/// Per-vertex estimated KMS' removal probability (`None` when unestimated).
#[pyfunction]
#[pyo3(signature = (g, vectors, t, samples=2000, seed=0, kappa=3.0))]
fn estimate_failure(g: &PyGraph, vectors: Vec<Vec<f64>>, t: f64, samples: usize, seed: u64, kappa: f64) -> PyResult<Vec<Option<f64>>> {
    let vc = coloring(g, &vectors, kappa)?;
    let rep = rounding::estimate_failure(&g.inner, &vc, t, samples, seed).map_err(to_py)?;
    Ok(rep.per_vertex.iter().map(|f| f.estimate.map(|e| e.p)).collect())
}

/// Exponent summary for `(c, c')`.
#[pyfunction]
#[pyo3(signature = (c=0.0393241, c_prime=0.0258187))]
fn exponents(c: f64, c_prime: f64) -> PyResult<HashMap<String, f64>> {
    let p = params::exponents(c, c_prime).map_err(to_py)?;
    Ok(HashMap::from([
        ("eta0".into(), p.eta0),
        ("lambda0".into(), p.lambda0),
        ("f_n".into(), p.f_n),
        ("g_n".into(), p.g_n),
        ("progress_exponent".into(), p.progress_exponent),
        ("coloring_exponent".into(), p.coloring_exponent),
    ]))
}

/// Colors `g`; returns `(colors, num_colors, events_json)`. `config` is a
/// JSON color config.
#[pyfunction]
#[pyo3(signature = (g, seed=0, config=None))]
fn color_graph(g: &PyGraph, seed: u64, config: Option<&str>) -> PyResult<(Vec<Option<usize>>, usize, String)> {
    let mut cfg: ColorConfig = match config {
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => ColorConfig::default(),
    };
    cfg.seed = seed;
    let run = pipeline::color_graph(&g.inner, &cfg).map_err(to_py)?;
    let events = serde_json::to_string(&run.events).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((run.assignment.as_slice().to_vec(), run.num_colors(), events))
}

/// Runs the experiment harness on a JSON config; returns CSV text.
#[pyfunction]
fn run_experiment(config: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config).map_err(to_py)?;
    Ok(pipeline::run_experiment(&cfg).map_err(to_py)?.to_csv())
}

#[pymodule]
fn pytricolor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add("PreconditionError", m.py().get_type::<PreconditionError>())?;
    m.add("NotThreeColorableError", m.py().get_type::<NotThreeColorableError>())?;
    m.add_function(wrap_pyfunction!(generate_planted, m)?)?;
    m.add_function(wrap_pyfunction!(planted_simplex, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sdp, m)?)?;
    m.add_function(wrap_pyfunction!(kms_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(inefficient_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(kms_round, m)?)?;
    m.add_function(wrap_pyfunction!(kms_prime_round, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_failure, m)?)?;
    m.add_function(wrap_pyfunction!(exponents, m)?)?;
    m.add_function(wrap_pyfunction!(color_graph, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
