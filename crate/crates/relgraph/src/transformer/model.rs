//! Forward passes: encoding, teacher-forced loss graphs, and greedy
//! decoding with captured attention weights.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{AttentionParamsG, FeedForwardParamsG, LayerNormParamsG, ModelParamsG};
use super::vocab::{EOS_ID, PAD_ID, SOS_ID};
use super::{AttentionKind, AttentionRecord, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::tensor::{NodeId, Tape, Tensor};

/// A configured transformer with its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

/// Which embedding tables a sequence goes through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

/// Encoder output: per-position memory plus self-attention records.
#[derive(Debug, Clone)]
pub struct EncodeOutput {
    pub memory: Tensor,
    pub records: Vec<AttentionRecord>,
}

/// Cross-attention rows captured at one emission step: one record per
/// (layer, head), each of shape [1, source-length].
#[derive(Debug, Clone)]
pub struct StepAttention {
    pub records: Vec<AttentionRecord>,
}

/// Greedy decoding result. `tokens` holds the emitted ids with the end
/// marker stripped; `steps` is aligned with `tokens`.
#[derive(Debug, Clone)]
pub struct DecodeOutput {
    pub tokens: Vec<usize>,
    pub truncated: bool,
    pub steps: Vec<StepAttention>,
}

impl Model {
    pub fn init(config: ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let params = ModelParams::init(&config, rng)?;
        Ok(Model { config, params })
    }

    fn register_leaves(&self, tape: &mut Tape) -> ModelParamsG<NodeId> {
        let mut flat = self.params.flatten().into_iter();
        ModelParamsG::from_fn(&self.config, &mut |_, _| tape.leaf(flat.next().unwrap().clone()))
    }

    /// Token embedding plus learned positional embedding, summed
    /// elementwise. Position 0 is the start-of-sequence marker.
    pub fn embed_with_position(&self, ids: &[usize], side: Side) -> Result<Tensor> {
        let mut tape = Tape::new();
        let leaves = self.register_leaves(&mut tape);
        let node = embed_sequence(&mut tape, &self.config, &leaves, ids, side, &mut None)?;
        Ok(tape.value(node).clone())
    }

    /// Run the encoder in inference mode.
    pub fn encode(&self, src_ids: &[usize]) -> Result<EncodeOutput> {
        let mut tape = Tape::new();
        let leaves = self.register_leaves(&mut tape);
        let mut records = Vec::new();
        let memory = encoder_forward(
            &mut tape,
            &self.config,
            &leaves,
            src_ids,
            &mut None,
            &mut Some(&mut records),
        )?;
        Ok(EncodeOutput { memory: tape.value(memory).clone(), records })
    }

    /// Teacher-forced logits for a target prefix against a fixed memory, in
    /// inference mode; returns cross-attention records of all layers/heads.
    pub fn decode_logits(
        &self,
        memory: &Tensor,
        src_ids: &[usize],
        prefix: &[usize],
    ) -> Result<(Tensor, Vec<AttentionRecord>)> {
        let mut tape = Tape::new();
        let leaves = self.register_leaves(&mut tape);
        let memory_node = tape.leaf(memory.clone());
        let mut records = Vec::new();
        let logits = decoder_forward(
            &mut tape,
            &self.config,
            &leaves,
            prefix,
            memory_node,
            &source_valid(src_ids),
            &mut None,
            &mut Some(&mut records),
        )?;
        let cross: Vec<AttentionRecord> =
            records.into_iter().filter(|r| r.kind == AttentionKind::DecoderCross).collect();
        Ok((tape.value(logits).clone(), cross))
    }

    /// Greedy argmax decoding: emit tokens until the end marker or the step
    /// budget runs out (ties break toward the lowest id). Each emitted step
    /// carries the cross-attention rows that produced it.
    pub fn greedy_decode(
        &self,
        memory: &Tensor,
        src_ids: &[usize],
        max_steps: usize,
    ) -> Result<DecodeOutput> {
        if max_steps > self.config.max_target_length {
            return Err(Error::invalid(format!(
                "max_steps {max_steps} exceeds max target length {}",
                self.config.max_target_length
            )));
        }
        // The prefix holds <sos> plus all previous emissions, so the
        // positional table caps emissions at max_target_length - 1.
        let budget = max_steps.min(self.config.max_target_length - 1);
        let mut prefix = vec![SOS_ID];
        let mut tokens = Vec::new();
        let mut steps = Vec::new();
        let mut truncated = true;
        for _ in 0..budget {
            let (logits, cross) = self.decode_logits(memory, src_ids, &prefix)?;
            let last = logits.row(logits.rows() - 1);
            let next = argmax(last);
            if next == EOS_ID {
                truncated = false;
                break;
            }
            let step_row = prefix.len() - 1;
            let records = cross
                .iter()
                .map(|r| AttentionRecord {
                    layer: r.layer,
                    head: r.head,
                    kind: r.kind,
                    weights: Tensor::from_vec(
                        vec![1, r.weights.cols()],
                        r.weights.row(step_row).to_vec(),
                    )
                    .unwrap(),
                })
                .collect();
            steps.push(StepAttention { records });
            tokens.push(next);
            prefix.push(next);
        }
        Ok(DecodeOutput { tokens, truncated, steps })
    }

    /// Convenience: encode then greedily decode.
    pub fn predict_ids(&self, src_ids: &[usize], max_steps: usize) -> Result<DecodeOutput> {
        let enc = self.encode(src_ids)?;
        self.greedy_decode(&enc.memory, src_ids, max_steps)
    }

    /// Teacher-forced mean NLL of a target sequence (payload token ids,
    /// without markers), in inference mode.
    pub fn teacher_forced_loss(&self, src_ids: &[usize], target: &[usize]) -> Result<f64> {
        let (tgt_in, tgt_out) = teacher_pair(target);
        self.training_loss(src_ids, &tgt_in, &tgt_out, None)
    }

    /// Loss of one training example; dropout is active when an rng is given.
    pub fn training_loss(
        &self,
        src_ids: &[usize],
        tgt_in: &[usize],
        tgt_out: &[usize],
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<f64> {
        let (tape, loss, _) = self.build_training_step(src_ids, tgt_in, tgt_out, &mut dropout_rng)?;
        Ok(tape.value(loss).data()[0])
    }

    /// Loss plus gradients for every parameter, in canonical flatten order.
    pub fn training_loss_and_grads(
        &self,
        src_ids: &[usize],
        tgt_in: &[usize],
        tgt_out: &[usize],
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Vec<Tensor>)> {
        let (mut tape, loss, leaves) =
            self.build_training_step(src_ids, tgt_in, tgt_out, &mut dropout_rng)?;
        let value = tape.value(loss).data()[0];
        let grads = tape.backward(loss);
        Ok((value, grads.take(&leaves)))
    }

    fn build_training_step(
        &self,
        src_ids: &[usize],
        tgt_in: &[usize],
        tgt_out: &[usize],
        dropout_rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Result<(Tape, NodeId, Vec<NodeId>)> {
        let mut tape = Tape::new();
        let leaves = self.register_leaves(&mut tape);
        let leaf_ids: Vec<NodeId> = leaves.flatten().into_iter().copied().collect();
        let memory =
            encoder_forward(&mut tape, &self.config, &leaves, src_ids, dropout_rng, &mut None)?;
        let logits = decoder_forward(
            &mut tape,
            &self.config,
            &leaves,
            tgt_in,
            memory,
            &source_valid(src_ids),
            dropout_rng,
            &mut None,
        )?;
        let loss = tape.cross_entropy(logits, tgt_out, PAD_ID)?;
        Ok((tape, loss, leaf_ids))
    }
}

/// Decoder input/output pair for a payload sequence: prepend the start
/// marker, append the end marker.
pub(crate) fn teacher_pair(target: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut tgt_in = Vec::with_capacity(target.len() + 1);
    tgt_in.push(SOS_ID);
    tgt_in.extend_from_slice(target);
    let mut tgt_out = target.to_vec();
    tgt_out.push(EOS_ID);
    (tgt_in, tgt_out)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn source_valid(src_ids: &[usize]) -> Vec<bool> {
    src_ids.iter().map(|&id| id != PAD_ID).collect()
}

fn apply_dropout(
    tape: &mut Tape,
    x: NodeId,
    rate: f64,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> NodeId {
    match rng {
        Some(r) if rate > 0.0 => {
            let n = tape.value(x).len();
            let keep: Vec<bool> = (0..n).map(|_| r.random::<f64>() >= rate).collect();
            tape.dropout(x, &keep, rate)
        }
        _ => x,
    }
}

fn embed_sequence(
    tape: &mut Tape,
    cfg: &ModelConfig,
    leaves: &ModelParamsG<NodeId>,
    ids: &[usize],
    side: Side,
    dropout_rng: &mut Option<&mut ChaCha8Rng>,
) -> Result<NodeId> {
    let (table, pos_table, max_len) = match side {
        Side::Source => (leaves.src_tok_embed, leaves.src_pos_embed, cfg.max_source_length),
        Side::Target => (leaves.tgt_tok_embed, leaves.tgt_pos_embed, cfg.max_target_length),
    };
    if ids.is_empty() {
        return Err(Error::invalid("cannot embed an empty sequence"));
    }
    if ids.len() > max_len {
        return Err(Error::invalid(format!(
            "sequence of {} tokens exceeds positional vocabulary of {max_len}",
            ids.len()
        )));
    }
    let tok = tape.embed(table, ids)?;
    let positions: Vec<usize> = (0..ids.len()).collect();
    let pos = tape.embed(pos_table, &positions)?;
    let sum = tape.add(tok, pos);
    Ok(apply_dropout(tape, sum, cfg.dropout_rate, dropout_rng))
}

#[allow(clippy::too_many_arguments)]
fn multi_head_attention(
    tape: &mut Tape,
    q_in: NodeId,
    kv_in: NodeId,
    p: &AttentionParamsG<NodeId>,
    cfg: &ModelConfig,
    allowed: &[bool],
    layer: usize,
    kind: AttentionKind,
    records: &mut Option<&mut Vec<AttentionRecord>>,
) -> Result<NodeId> {
    let heads = cfg.attention_heads;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let q = tape.matmul(q_in, p.wq);
    let q = tape.add_row(q, p.bq);
    let k = tape.matmul(kv_in, p.wk);
    let k = tape.add_row(k, p.bk);
    let v = tape.matmul(kv_in, p.wv);
    let v = tape.add_row(v, p.bv);

    let mut head_outputs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = tape.slice_cols(q, h * dh, dh);
        let kh = tape.slice_cols(k, h * dh, dh);
        let vh = tape.slice_cols(v, h * dh, dh);
        let kt = tape.transpose(kh);
        let scores = tape.matmul(qh, kt);
        let scaled = tape.scale(scores, scale);
        let attn = tape.masked_softmax(scaled, allowed.to_vec())?;
        if let Some(rec) = records {
            rec.push(AttentionRecord {
                layer,
                head: h,
                kind,
                weights: tape.value(attn).clone(),
            });
        }
        head_outputs.push(tape.matmul(attn, vh));
    }
    let concat = tape.concat_cols(&head_outputs);
    let out = tape.matmul(concat, p.wo);
    Ok(tape.add_row(out, p.bo))
}

fn feed_forward(tape: &mut Tape, x: NodeId, p: &FeedForwardParamsG<NodeId>) -> NodeId {
    let h = tape.matmul(x, p.w1);
    let h = tape.add_row(h, p.b1);
    let h = tape.relu(h);
    let o = tape.matmul(h, p.w2);
    tape.add_row(o, p.b2)
}

/// Residual add + layer norm around a sublayer output (post-norm).
fn residual_norm(
    tape: &mut Tape,
    x: NodeId,
    sub: NodeId,
    ln: &LayerNormParamsG<NodeId>,
    cfg: &ModelConfig,
    dropout_rng: &mut Option<&mut ChaCha8Rng>,
) -> Result<NodeId> {
    let sub = apply_dropout(tape, sub, cfg.dropout_rate, dropout_rng);
    let sum = tape.add(x, sub);
    tape.layer_norm(sum, ln.gain, ln.bias, cfg.layer_norm_epsilon)
}

pub(crate) fn encoder_forward(
    tape: &mut Tape,
    cfg: &ModelConfig,
    leaves: &ModelParamsG<NodeId>,
    src_ids: &[usize],
    dropout_rng: &mut Option<&mut ChaCha8Rng>,
    records: &mut Option<&mut Vec<AttentionRecord>>,
) -> Result<NodeId> {
    let mut x = embed_sequence(tape, cfg, leaves, src_ids, Side::Source, dropout_rng)?;
    let s = src_ids.len();
    let valid = source_valid(src_ids);
    // Every query row may look at exactly the non-pad key positions.
    let mut allowed = vec![false; s * s];
    for q in 0..s {
        for k in 0..s {
            allowed[q * s + k] = valid[k];
        }
    }
    for (l, layer) in leaves.encoder.iter().enumerate() {
        let a = multi_head_attention(
            tape,
            x,
            x,
            &layer.self_attn,
            cfg,
            &allowed,
            l,
            AttentionKind::EncoderSelf,
            records,
        )?;
        x = residual_norm(tape, x, a, &layer.ln1, cfg, dropout_rng)?;
        let f = feed_forward(tape, x, &layer.ffn);
        x = residual_norm(tape, x, f, &layer.ln2, cfg, dropout_rng)?;
    }
    Ok(x)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn decoder_forward(
    tape: &mut Tape,
    cfg: &ModelConfig,
    leaves: &ModelParamsG<NodeId>,
    tgt_in: &[usize],
    memory: NodeId,
    src_valid: &[bool],
    dropout_rng: &mut Option<&mut ChaCha8Rng>,
    records: &mut Option<&mut Vec<AttentionRecord>>,
) -> Result<NodeId> {
    let mut y = embed_sequence(tape, cfg, leaves, tgt_in, Side::Target, dropout_rng)?;
    let t = tgt_in.len();
    let s = src_valid.len();

    let mut causal = vec![false; t * t];
    for q in 0..t {
        for k in 0..=q {
            causal[q * t + k] = true;
        }
    }
    let mut cross_allowed = vec![false; t * s];
    for q in 0..t {
        for k in 0..s {
            cross_allowed[q * s + k] = src_valid[k];
        }
    }

    for (l, layer) in leaves.decoder.iter().enumerate() {
        let a = multi_head_attention(
            tape,
            y,
            y,
            &layer.self_attn,
            cfg,
            &causal,
            l,
            AttentionKind::DecoderSelf,
            records,
        )?;
        y = residual_norm(tape, y, a, &layer.ln1, cfg, dropout_rng)?;
        let c = multi_head_attention(
            tape,
            y,
            memory,
            &layer.cross_attn,
            cfg,
            &cross_allowed,
            l,
            AttentionKind::DecoderCross,
            records,
        )?;
        y = residual_norm(tape, y, c, &layer.ln2, cfg, dropout_rng)?;
        let f = feed_forward(tape, y, &layer.ffn);
        y = residual_norm(tape, y, f, &layer.ln3, cfg, dropout_rng)?;
    }
    let logits = tape.matmul(y, leaves.out_w);
    Ok(tape.add_row(logits, leaves.out_b))
}
