//! Python bindings for the `hgcl` crate.

use std::path::PathBuf;

use hgcl::data::{self, DeltaMode};
use hgcl::manifold as mf;
use hgcl::pipeline::{self, Ablation, TrainConfig, ValMetric};
use ndarray::{Array1, Array2};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A hyperbolic model (`"poincare"` or `"lorentz"`) with curvature K < 0.
#[pyclass(name = "Manifold", frozen)]
struct PyManifold {
    inner: mf::Manifold,
}

impl PyManifold {
    fn point(&self, x: Vec<f64>) -> PyResult<mf::Point> {
        self.inner.point(Array1::from(x)).map_err(err)
    }
}

#[pymethods]
impl PyManifold {
    #[new]
    #[pyo3(signature = (kind, curvature, dim))]
    fn new(kind: &str, curvature: f64, dim: usize) -> PyResult<Self> {
        let kind: mf::ModelKind = kind.parse().map_err(err)?;
        Ok(Self {
            inner: mf::Manifold::new(kind, curvature, dim).map_err(err)?,
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    #[getter]
    fn curvature(&self) -> f64 {
        self.inner.curvature()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn origin(&self) -> Vec<f64> {
        self.inner.origin().coords.to_vec()
    }

    fn distance(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.inner.distance(&self.point(x)?, &self.point(y)?).map_err(err)
    }

    fn exp_map(&self, x: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<f64>> {
        let t = self.inner.tangent(&self.point(x)?, Array1::from(v)).map_err(err)?;
        Ok(self.inner.exp_map(&t).map_err(err)?.coords.to_vec())
    }

    fn log_map(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
        let t = self.inner.log_map(&self.point(x)?, &self.point(y)?).map_err(err)?;
        Ok(t.coords.to_vec())
    }

    fn parallel_transport(&self, x: Vec<f64>, y: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = self.point(x)?;
        let t = self.inner.tangent(&x, Array1::from(v)).map_err(err)?;
        let out = self.inner.parallel_transport(&x, &self.point(y)?, &t).map_err(err)?;
        Ok(out.coords.to_vec())
    }

    /// Moves `x` onto `target`, keeping its distance to the origin.
    fn transfer(&self, x: Vec<f64>, target: &PyManifold) -> PyResult<Vec<f64>> {
        Ok(mf::transfer(&self.point(x)?, &target.inner).map_err(err)?.coords.to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Manifold('{}', {}, {})", self.inner.kind().name(), self.inner.curvature(), self.inner.dim())
    }
}

#[pyclass(name = "Graph")]
struct PyGraph {
    inner: data::Graph,
}

#[pymethods]
impl PyGraph {
    /// Loads a graph directory (`edges.txt`, `features.csv`, `labels.csv`).
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: data::load_graph(&dir).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (branching, depth, d_feat=16, noise=1.0, seed=0))]
    fn synthetic_tree(branching: usize, depth: usize, d_feat: usize, noise: f64, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: data::synthetic_tree(branching, depth, d_feat, noise, seed).map_err(err)?,
        })
    }

    /// Replaces the split masks with a stratified split.
    #[pyo3(signature = (train, val, test, seed=0))]
    fn resplit(&mut self, train: f64, val: f64, test: f64, seed: u64) -> PyResult<()> {
        let masks = data::split(&self.inner.labels, (train, val, test), seed).map_err(err)?;
        self.inner.set_masks(masks);
        Ok(())
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges.clone()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels.clone()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.features)
    }
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Four-point δ of the largest component. Exact when `samples` is None.
#[pyfunction]
#[pyo3(signature = (graph, samples=None, seed=0))]
fn gromov_delta(graph: &PyGraph, samples: Option<usize>, seed: u64) -> PyResult<f64> {
    let mode = match samples {
        None => DeltaMode::Exact,
        Some(q) => DeltaMode::Sampled { quadruples: q, seed },
    };
    Ok(data::gromov_delta(&graph.inner, mode).map_err(err)?.delta)
}

#[pyclass(name = "TrainResult", frozen)]
struct PyTrainResult {
    #[pyo3(get)]
    best_epoch: usize,
    #[pyo3(get)]
    best_val: f64,
    #[pyo3(get)]
    test_accuracy: f64,
    #[pyo3(get)]
    test_f1: f64,
    #[pyo3(get)]
    history: Vec<(f64, f64, f64)>,
    #[pyo3(get)]
    embedding_alpha: Vec<Vec<f64>>,
    #[pyo3(get)]
    embedding_beta: Vec<Vec<f64>>,
}

/// Trains the two-view model and reports test metrics of the best epoch.
/// `history` holds `(task_loss, contrastive_loss, val_metric)` per epoch.
#[pyfunction]
#[pyo3(signature = (graph, seed=0, epochs=500, patience=100, lambda_c=1.0, ablation="full", val_metric="accuracy"))]
fn train(
    py: Python<'_>,
    graph: &PyGraph,
    seed: u64,
    epochs: usize,
    patience: usize,
    lambda_c: f64,
    ablation: &str,
    val_metric: &str,
) -> PyResult<PyTrainResult> {
    let cfg = TrainConfig {
        seed,
        epochs,
        patience: patience.min(epochs),
        lambda_c,
        ablation: ablation.parse::<Ablation>().map_err(err)?,
        val_metric: val_metric.parse::<ValMetric>().map_err(err)?,
        ..TrainConfig::default()
    };
    let g = &graph.inner;
    py.detach(|| {
        let out = pipeline::train(g, &cfg)?;
        let test = pipeline::evaluate(&out.model, g, &g.test_mask)?;
        let emb = out.model.embed(&g.features, &data::normalize_adjacency(g))?;
        Ok::<_, hgcl::Error>(PyTrainResult {
            best_epoch: out.best_epoch,
            best_val: out.best_val,
            test_accuracy: test.accuracy,
            test_f1: test.macro_f1,
            history: out.history.iter().map(|r| (r.task_loss, r.hpc_loss, r.val_metric)).collect(),
            embedding_alpha: rows(&emb.alpha),
            embedding_beta: rows(&emb.beta),
        })
    })
    .map_err(err)
}

#[pymodule]
fn hgcl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyManifold>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyTrainResult>()?;
    m.add_function(wrap_pyfunction!(gromov_delta, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
