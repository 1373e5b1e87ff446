//! Encoder-decoder transformer with learned positional embeddings.
//!
//! The architecture follows the standard post-norm transformer: multi-head
//! attention, position-wise feed-forward blocks, residual connections and
//! layer norm, with token and position embeddings summed elementwise at the
//! input. Decoding is greedy and exposes per-head cross-attention rows for
//! downstream triplet extraction.

mod checkpoint;
mod embeddings;
mod model;
mod params;
mod train;
mod vocab;

pub use checkpoint::{Checkpoint, TrainingMetadata};
pub use embeddings::load_pretrained_embeddings;
pub use model::{DecodeOutput, EncodeOutput, Model, StepAttention};
pub use model::Side;
pub use params::{
    param_names, AttentionParamsG, DecoderLayerG, EncoderLayerG, FeedForwardParamsG,
    LayerNormParamsG, ModelParams, ModelParamsG,
};
pub use train::{train, EpochStats, TrainConfig, TrainOutcome};
pub use vocab::{Vocabulary, EOS_ID, PAD_ID, SOS_ID, UNK_ID};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Architecture hyperparameters; every tensor shape derives from these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub attention_heads: usize,
    pub feedforward_dim: usize,
    pub embedding_dim: usize,
    pub dropout_rate: f64,
    pub max_source_length: usize,
    pub max_target_length: usize,
    pub source_vocab_size: usize,
    pub target_vocab_size: usize,
    pub layer_norm_epsilon: f64,
}

impl ModelConfig {
    /// Full-scale defaults: 2+2 layers, 10 heads, FFN 512, 300-d
    /// embeddings, dropout 0.1.
    pub fn new(source_vocab_size: usize, target_vocab_size: usize) -> Self {
        ModelConfig {
            encoder_layers: 2,
            decoder_layers: 2,
            attention_heads: 10,
            feedforward_dim: 512,
            embedding_dim: 300,
            dropout_rate: 0.1,
            max_source_length: 64,
            max_target_length: 16,
            source_vocab_size,
            target_vocab_size,
            layer_norm_epsilon: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.embedding_dim % self.attention_heads != 0 {
            return Err(Error::invalid(format!(
                "embedding dim {} not divisible by {} attention heads",
                self.embedding_dim, self.attention_heads
            )));
        }
        if self.max_source_length < 2 || self.max_target_length < 2 {
            return Err(Error::invalid("max lengths must leave room for start/end markers"));
        }
        if self.source_vocab_size <= UNK_ID || self.target_vocab_size <= UNK_ID {
            return Err(Error::invalid("vocabulary too small for special tokens"));
        }
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return Err(Error::invalid("need at least one encoder and decoder layer"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid("dropout rate must be in [0, 1)"));
        }
        if self.layer_norm_epsilon <= 0.0 {
            return Err(Error::invalid("layer-norm epsilon must be positive"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embedding_dim / self.attention_heads
    }
}

/// Which attention module a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttentionKind {
    EncoderSelf,
    DecoderSelf,
    DecoderCross,
}

/// One attention head's weights captured during a forward pass. Each row is
/// a probability distribution over source positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub layer: usize,
    pub head: usize,
    pub kind: AttentionKind,
    pub weights: Tensor,
}
