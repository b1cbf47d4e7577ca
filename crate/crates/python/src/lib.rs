//! Python bindings for the `gttf` crate.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gttf::cli::{load_graph, GraphArgs};
use gttf::estimators::{audit_estimator, estimate_tk as estimate, exact_tk as exact, DenseTransition};
use gttf::evaluation::{evaluate_link_prediction, make_split, roc_auc as auc, ScoredPairs};
use gttf::graph_store::{build_compact_adj, toy_graph, write_snapshot, CompactAdj, EdgeList, NodeId};
use gttf::learning::{init_model, train_embeddings, Method, Schedule, Table, TrainConfig, TrainOutput};
use gttf::rng::RngStream;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(t: &Table) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

/// Compact adjacency of an undirected (or directed) graph.
#[pyclass(name = "Graph", module = "gttf_py", frozen)]
struct PyGraph {
    adj: CompactAdj,
    edges: Vec<(NodeId, NodeId)>,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (n, edges, directed = false))]
    fn new(n: usize, edges: Vec<(NodeId, NodeId)>, directed: bool) -> PyResult<Self> {
        let list = if directed { EdgeList::directed(n, &edges) } else { EdgeList::undirected(n, &edges) };
        let adj = build_compact_adj(&list, !directed).map_err(value_err)?.0;
        let edges = adj.undirected_edges();
        Ok(Self { adj, edges })
    }

    /// Edge list file or binary snapshot.
    #[staticmethod]
    #[pyo3(signature = (path, map_ids = false, directed = false))]
    fn load(path: PathBuf, map_ids: bool, directed: bool) -> PyResult<Self> {
        let g = load_graph(&GraphArgs { graph: path, map_ids, directed }).map_err(|e| PyIOError::new_err(format!("{e:#}")))?;
        Ok(Self { adj: g.adj, edges: g.undirected_edges })
    }

    /// The five-node example graph.
    #[staticmethod]
    fn toy() -> Self {
        let adj = build_compact_adj(&toy_graph(), true).expect("toy graph is valid").0;
        let edges = adj.undirected_edges();
        Self { adj, edges }
    }

    #[getter]
    fn n(&self) -> usize {
        self.adj.n()
    }

    /// Stored directed entries.
    #[getter]
    fn m(&self) -> usize {
        self.adj.m()
    }

    fn degree(&self, u: NodeId) -> PyResult<usize> {
        self.check(u)?;
        Ok(self.adj.degree(u))
    }

    fn neighbors(&self, u: NodeId) -> PyResult<Vec<NodeId>> {
        self.check(u)?;
        Ok(self.adj.neighbors(u).to_vec())
    }

    fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.edges.clone()
    }

    fn save_snapshot(&self, path: PathBuf) -> PyResult<()> {
        let mut bytes = Vec::new();
        write_snapshot(&self.adj, &mut bytes).map_err(|e| PyIOError::new_err(e.to_string()))?;
        std::fs::write(&path, bytes).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))
    }

    fn __len__(&self) -> usize {
        self.adj.n()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, m={})", self.adj.n(), self.adj.m())
    }
}

impl PyGraph {
    fn check(&self, u: NodeId) -> PyResult<()> {
        if u >= self.adj.n() {
            return Err(PyValueError::new_err(format!("node {u} out of range for {} nodes", self.adj.n())));
        }
        Ok(())
    }
}

/// `T̂^k` rows for `batch` (all nodes when omitted), as a dense list of lists.
#[pyfunction]
#[pyo3(signature = (graph, k, fanout = 3, batch = None, seed = 1, workers = 1))]
fn estimate_tk(
    py: Python<'_>,
    graph: &PyGraph,
    k: usize,
    fanout: usize,
    batch: Option<Vec<NodeId>>,
    seed: u64,
    workers: usize,
) -> PyResult<Vec<Vec<f64>>> {
    let batch = batch.unwrap_or_else(|| (0..graph.adj.n()).collect());
    if let Some(&u) = batch.iter().find(|&&u| u >= graph.adj.n()) {
        graph.check(u)?;
    }
    let est = py
        .detach(|| estimate(&graph.adj, &batch, k, fanout, &RngStream::new(seed), workers))
        .map_err(value_err)?;
    let dense = est.to_dense(graph.adj.n());
    Ok((0..dense.nrows()).map(|i| dense.row(i).iter().copied().collect()).collect())
}

/// Exact `T^k` for small graphs.
#[pyfunction]
fn exact_tk(graph: &PyGraph, k: usize) -> PyResult<Vec<Vec<f64>>> {
    let dense = DenseTransition::from_adj(&graph.adj).map_err(value_err)?;
    let tk = exact(&dense, k).map_err(value_err)?.0;
    Ok((0..tk.nrows()).map(|i| tk.row(i).iter().copied().collect()).collect())
}

/// Unbiasedness and variance audits over `runs` traversals of the whole graph.
#[pyfunction]
#[pyo3(signature = (graph, k = 2, fanout = 3, runs = 10_000, seed = 1, workers = 1))]
fn audit_tk<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    k: usize,
    fanout: usize,
    runs: usize,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let batch: Vec<NodeId> = (0..graph.adj.n()).collect();
    let (mean, var) = py
        .detach(|| audit_estimator(&graph.adj, &batch, k, fanout, runs, &RngStream::new(seed).substream(1), workers))
        .map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("max_abs_error", mean.max_abs_error)?;
    out.set_item("tolerance", mean.tolerance)?;
    out.set_item("unbiased", mean.pass)?;
    out.set_item("max_variance", var.max_empirical)?;
    out.set_item("variance_bound", var.bound)?;
    out.set_item("variance_pass", var.pass)?;
    Ok(out)
}

fn parse_method(method: &str, p: f64, q: f64) -> PyResult<Method> {
    match method {
        "deepwalk" => Ok(Method::DeepWalk),
        "node2vec" => Ok(Method::Node2Vec { p, q }),
        "wys" => Ok(Method::Wys),
        other => Err(PyValueError::new_err(format!("unknown method {other:?}; expected deepwalk, node2vec or wys"))),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_training(
    py: Python<'_>,
    adj: &CompactAdj,
    method: &str,
    dim: usize,
    epochs: usize,
    lr: f64,
    fanout: usize,
    depth: usize,
    window: usize,
    negatives: usize,
    p: f64,
    q: f64,
    seed: u64,
    workers: usize,
) -> PyResult<TrainOutput> {
    let method = parse_method(method, p, q)?;
    let config = TrainConfig {
        fanouts: vec![fanout; depth],
        window,
        negatives,
        schedule: Schedule { initial: lr, ..Schedule::default() },
        rounds: epochs,
        workers,
        ..TrainConfig::default()
    };
    // Same streams as the command line, so equal seeds give equal embeddings.
    let rng = RngStream::new(seed);
    py.detach(|| {
        let model = init_model(adj.n(), dim, &method, window, &rng.substream(0))?;
        train_embeddings(adj, model, &method, &config, &rng.substream(1))
    })
    .map_err(value_err)
}

/// Train node embeddings; returns `(embeddings, losses)`.
#[pyfunction]
#[pyo3(signature = (
    graph, method = "deepwalk", dim = 128, epochs = 200, lr = 0.5, fanout = 3, depth = 3,
    window = 5, negatives = 10, p = 1.0, q = 1.0, seed = 1, workers = 1
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    graph: &PyGraph,
    method: &str,
    dim: usize,
    epochs: usize,
    lr: f64,
    fanout: usize,
    depth: usize,
    window: usize,
    negatives: usize,
    p: f64,
    q: f64,
    seed: u64,
    workers: usize,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let out = run_training(py, &graph.adj, method, dim, epochs, lr, fanout, depth, window, negatives, p, q, seed, workers)?;
    Ok((rows(&out.model.embeddings()), out.losses))
}

/// Hold out a fraction of edges, train on the rest, and score the held-out
/// edges against sampled non-edges.
#[pyfunction]
#[pyo3(signature = (
    graph, method = "deepwalk", fraction = 0.2, split_seed = 1, dim = 128, epochs = 200, lr = 0.5,
    fanout = 3, depth = 3, window = 5, negatives = 10, p = 1.0, q = 1.0, seed = 1, workers = 1
))]
#[allow(clippy::too_many_arguments)]
fn link_prediction<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    method: &str,
    fraction: f64,
    split_seed: u64,
    dim: usize,
    epochs: usize,
    lr: f64,
    fanout: usize,
    depth: usize,
    window: usize,
    negatives: usize,
    p: f64,
    q: f64,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let split = make_split(graph.adj.n(), &graph.edges, fraction, 1, split_seed).map_err(value_err)?;
    let train_adj = split.train_adjacency().map_err(value_err)?;
    let out = run_training(py, &train_adj, method, dim, epochs, lr, fanout, depth, window, negatives, p, q, seed, workers)?;
    let metrics = evaluate_link_prediction(&out.model.embeddings(), &split).map_err(value_err)?;
    let dict = PyDict::new(py);
    dict.set_item("roc_auc", metrics.roc_auc)?;
    dict.set_item("mean_rank", metrics.mean_rank)?;
    dict.set_item("n_test", metrics.n_test)?;
    dict.set_item("n_negatives", metrics.n_negatives)?;
    dict.set_item("final_loss", out.losses.last().copied())?;
    Ok(dict)
}

/// ROC-AUC of positive against negative scores, ties counting one half.
#[pyfunction]
fn roc_auc(positives: Vec<f64>, negatives: Vec<f64>) -> PyResult<f64> {
    auc(&ScoredPairs::from_scores(&positives, &negatives)).map_err(value_err)
}

#[pymodule]
fn gttf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(estimate_tk, m)?)?;
    m.add_function(wrap_pyfunction!(exact_tk, m)?)?;
    m.add_function(wrap_pyfunction!(audit_tk, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(link_prediction, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
