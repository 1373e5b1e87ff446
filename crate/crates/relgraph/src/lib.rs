//! Inference of a text corpus's domain schema (its "metagraph").
//!
//! The pipeline: text snippets are translated into ordered sequences of
//! relation-type tokens by a from-scratch seq2seq transformer; an ensemble
//! of models trained under different breadth-first orderings of the relation
//! vocabulary is fused by per-relation consensus voting; reconstructed
//! metagraphs are scored with set F1 and centrality-histogram distances;
//! and entity pairs are recovered from decoder attention propagated over
//! dependency graphs.

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod extract;
pub mod relation;
pub mod tensor;
pub mod transformer;

pub use error::{Error, Result};
