//! Python bindings: corpora, metagraphs, training, consensus, evaluation,
//! and the attention-propagation formulas.
//!
//! Build with `cargo build -p relgraph-py --release --features extension-module`
//! and rename the produced `librelgraph_py.so` to `relgraph_py.so` (see
//! python/smoke_test.py, which automates this).

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use relgraph::dataset;
use relgraph::ensemble;
use relgraph::error::Error as RgError;
use relgraph::eval;
use relgraph::extract;
use relgraph::relation::{self, EntityType, RelationEdge};
use relgraph::transformer;

fn to_py_err(e: RgError) -> PyErr {
    if e.is_usage() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

trait IntoPyResult<T> {
    fn into_py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for relgraph::Result<T> {
    fn into_py(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

fn parse_edges(tokens: Vec<String>, directed: bool) -> PyResult<Vec<RelationEdge>> {
    tokens
        .iter()
        .map(|t| RelationEdge::parse(t, directed))
        .collect::<relgraph::Result<_>>()
        .into_py()
}

/// Domain schema: entity-type nodes and relation-type edges.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Metagraph {
    inner: relation::Metagraph,
}

#[pymethods]
impl Metagraph {
    /// Build from canonical `i.R.j` tokens.
    #[staticmethod]
    #[pyo3(signature = (tokens, directed = false))]
    fn from_tokens(tokens: Vec<String>, directed: bool) -> PyResult<Self> {
        let edges = parse_edges(tokens, directed)?;
        Ok(Metagraph { inner: edges.into_iter().collect() })
    }

    fn nodes(&self) -> Vec<String> {
        self.inner.nodes().map(|n| n.as_str().to_string()).collect()
    }

    fn edges(&self) -> PyResult<Vec<String>> {
        self.inner.edges().map(|e| e.token()).collect::<relgraph::Result<_>>().into_py()
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn is_connected(&self) -> bool {
        self.inner.is_connected()
    }

    fn to_dot(&self, name: &str) -> String {
        self.inner.to_dot(name)
    }

    fn __repr__(&self) -> String {
        format!(
            "Metagraph(nodes={}, edges={})",
            self.inner.node_count(),
            self.inner.edge_count()
        )
    }
}

/// A corpus of annotated text snippets.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Corpus {
    inner: dataset::Corpus,
}

#[pymethods]
impl Corpus {
    #[staticmethod]
    #[pyo3(signature = (path, directed = false))]
    fn load(path: PathBuf, directed: bool) -> PyResult<Self> {
        Ok(Corpus { inner: dataset::load_jsonl(&path, directed).into_py()? })
    }

    /// Random connected-domain corpus with template text.
    #[staticmethod]
    fn synthetic(nodes: usize, edges: usize, instances: usize, seed: u64) -> PyResult<Self> {
        Ok(Corpus { inner: dataset::generate_synthetic(nodes, edges, instances, seed).into_py()? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        dataset::save_jsonl(&self.inner, &path).into_py()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn instance_ids(&self) -> Vec<String> {
        self.inner.instances.iter().map(|i| i.id.clone()).collect()
    }

    fn text_of(&self, id: &str) -> PyResult<String> {
        self.find(id).map(|i| i.text())
    }

    fn relations_of(&self, id: &str) -> PyResult<Vec<String>> {
        let inst = self.find(id)?;
        inst.relations.iter().map(|r| r.token()).collect::<relgraph::Result<_>>().into_py()
    }

    /// (instances, relation-language size, mean relations per instance).
    fn stats(&self) -> PyResult<(usize, usize, f64)> {
        let s = self.inner.stats().into_py()?;
        Ok((s.instances, s.relation_language_size, s.mean_relations_per_instance))
    }

    fn general_metagraph(&self) -> PyResult<Metagraph> {
        Ok(Metagraph { inner: self.inner.general_metagraph().into_py()? })
    }
}

impl Corpus {
    fn find(&self, id: &str) -> PyResult<&dataset::Instance> {
        self.inner
            .instances
            .iter()
            .find(|i| i.id == id)
            .ok_or_else(|| PyValueError::new_err(format!("no instance {id:?}")))
    }
}

/// A trained model with its vocabularies and ordering.
#[pyclass]
struct Checkpoint {
    inner: transformer::Checkpoint,
}

#[pymethods]
impl Checkpoint {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Checkpoint { inner: transformer::Checkpoint::load(&path).into_py()? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).into_py()
    }

    /// BFS start node of this model's ordering, if any.
    #[getter]
    fn start_node(&self) -> Option<String> {
        self.inner.start_node().map(str::to_string)
    }

    #[getter]
    fn best_valid_loss(&self) -> f64 {
        self.inner.metadata.best_valid_loss
    }

    /// Predicted relation tokens for a raw text snippet.
    fn predict_text(&self, text: &str) -> PyResult<Vec<String>> {
        let instance = dataset::Instance {
            id: "adhoc".into(),
            tokens: dataset::tokenize(text),
            relations: vec![],
            triplets: vec![],
            entities: vec![],
            dep_edges: vec![],
            noun_chunks: vec![],
            subdomain: None,
        };
        let pred = self.inner.predict_instance(&instance).into_py()?;
        pred.relations
            .iter()
            .map(|r| r.token())
            .collect::<relgraph::Result<_>>()
            .into_py()
    }

    /// Exact-set accuracy over a corpus.
    fn accuracy(&self, corpus: &Corpus) -> PyResult<f64> {
        self.inner.exact_set_accuracy(&corpus.inner.instances).into_py()
    }
}

/// Train a transformer on a corpus and return the best checkpoint.
#[pyfunction]
#[pyo3(signature = (corpus, seed, start = None, embed_dim = 32, heads = 2, ffn_dim = 64,
                    epochs = 20, learning_rate = 0.005, batch_size = 16, patience = 5))]
#[allow(clippy::too_many_arguments)]
fn train(
    corpus: &Corpus,
    seed: u64,
    start: Option<String>,
    embed_dim: usize,
    heads: usize,
    ffn_dim: usize,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    patience: usize,
) -> PyResult<Checkpoint> {
    let splits = dataset::random_split(&corpus.inner, &dataset::SplitSpec::new(seed)).into_py()?;
    let general = splits.train.general_metagraph().into_py()?;
    let start = match start {
        Some(s) => EntityType::new(s),
        None => general.nodes().next().cloned().ok_or_else(|| {
            PyValueError::new_err("train split has an empty metagraph")
        })?,
    };
    let ordering = relation::bfs_ordering(&general, &start).into_py()?;
    let mut cfg = transformer::ModelConfig::new(4, 4);
    cfg.embedding_dim = embed_dim;
    cfg.attention_heads = heads;
    cfg.feedforward_dim = ffn_dim;
    let tc = transformer::TrainConfig {
        learning_rate,
        batch_size,
        max_epochs: epochs,
        patience,
        ..transformer::TrainConfig::default()
    };
    let outcome = transformer::train(&splits, &cfg, &tc, &ordering, seed).into_py()?;
    Ok(Checkpoint { inner: outcome.checkpoint })
}

/// Breadth-first ordering of a metagraph's relation tokens from `start`.
#[pyfunction]
fn bfs_ordering(graph: &Metagraph, start: &str) -> PyResult<Vec<String>> {
    let v = relation::bfs_ordering(&graph.inner, &EntityType::new(start)).into_py()?;
    Ok(v.tokens().to_vec())
}

/// All BFS orderings, keyed by start node.
#[pyfunction]
fn enumerate_orderings(graph: &Metagraph) -> PyResult<Vec<(String, Vec<String>)>> {
    let all = relation::enumerate_orderings(&graph.inner).into_py()?;
    Ok(all
        .into_iter()
        .map(|(n, v)| (n.as_str().to_string(), v.tokens().to_vec()))
        .collect())
}

/// Per-relation majority consensus over member prediction sets.
#[pyfunction]
#[pyo3(signature = (predictions, theta = 0.5, directed = false))]
fn woc_consensus(
    predictions: Vec<Vec<String>>,
    theta: f64,
    directed: bool,
) -> PyResult<Vec<String>> {
    let sets: Vec<ensemble::PredictionSet> = predictions
        .into_iter()
        .enumerate()
        .map(|(i, tokens)| {
            Ok(ensemble::PredictionSet {
                instance_id: "instance".into(),
                member: format!("m{i}"),
                relations: parse_edges(tokens, directed)?.into_iter().collect(),
            })
        })
        .collect::<PyResult<_>>()?;
    let out = ensemble::woc_consensus(&sets, theta).into_py()?;
    out.iter().map(|r| r.token()).collect::<relgraph::Result<_>>().into_py()
}

/// Jensen-Shannon distance between two probability vectors.
#[pyfunction]
fn jsd(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    eval::jsd(&p, &q).into_py()
}

#[pyfunction]
fn degree_centrality(graph: &Metagraph) -> PyResult<BTreeMap<String, f64>> {
    let c = eval::degree_centrality(&graph.inner).into_py()?;
    Ok(c.into_iter().map(|(n, v)| (n.as_str().to_string(), v)).collect())
}

#[pyfunction]
fn eigenvector_centrality(graph: &Metagraph) -> PyResult<BTreeMap<String, f64>> {
    let c = eval::eigenvector_centrality(&graph.inner).into_py()?;
    Ok(c.into_iter().map(|(n, v)| (n.as_str().to_string(), v)).collect())
}

/// Compare a predicted metagraph against the ground truth. Returns a dict
/// with edges_f1, nodes_f1, degree_jsd, eigenvector_jsd.
#[pyfunction]
fn evaluate_metagraph(
    predicted: &Metagraph,
    actual: &Metagraph,
) -> PyResult<BTreeMap<String, f64>> {
    let m = eval::evaluate_metagraph(&predicted.inner, &actual.inner).into_py()?;
    Ok([
        ("edges_f1".to_string(), m.edges_f1),
        ("nodes_f1".to_string(), m.nodes_f1),
        ("degree_jsd".to_string(), m.degree_jsd),
        ("eigenvector_jsd".to_string(), m.eigenvector_jsd),
    ]
    .into())
}

/// Propagate attention weights one hop over a dependency graph:
/// w_i = 2 a_i + sum of neighbors' a_j.
#[pyfunction]
fn propagate_weights(attention: Vec<f64>, dep_edges: Vec<(usize, usize)>) -> PyResult<Vec<f64>> {
    let w = extract::propagate_weights("r", &attention, &dep_edges).into_py()?;
    Ok(w.weights)
}

/// Stop-word-aware chunk scores over propagated weights. Chunks are
/// half-open token ranges; returns one score per chunk in position order.
#[pyfunction]
#[pyo3(signature = (weights, chunks, tokens, stop_words = vec![]))]
fn score_chunks(
    weights: Vec<f64>,
    chunks: Vec<(usize, usize)>,
    tokens: Vec<String>,
    stop_words: Vec<String>,
) -> PyResult<Vec<f64>> {
    let w = extract::TokenWeightVector { relation: "r".into(), weights };
    let stops: BTreeSet<String> = stop_words.into_iter().collect();
    let scores = extract::score_chunks(&w, &chunks, &tokens, &stops).into_py()?;
    Ok(scores.into_iter().map(|s| s.score).collect())
}

/// Lowercase whitespace/punctuation tokenization used across the library.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    dataset::tokenize(text)
}

#[pymodule]
fn relgraph_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Metagraph>()?;
    m.add_class::<Corpus>()?;
    m.add_class::<Checkpoint>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(bfs_ordering, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_orderings, m)?)?;
    m.add_function(wrap_pyfunction!(woc_consensus, m)?)?;
    m.add_function(wrap_pyfunction!(jsd, m)?)?;
    m.add_function(wrap_pyfunction!(degree_centrality, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvector_centrality, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_metagraph, m)?)?;
    m.add_function(wrap_pyfunction!(propagate_weights, m)?)?;
    m.add_function(wrap_pyfunction!(score_chunks, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    Ok(())
}
