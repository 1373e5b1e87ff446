//! Model parameters, generic over the slot type so the same structure holds
//! weight tensors (storage) or tape node ids (during a forward pass).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParamsG<T> {
    pub wq: T,
    pub bq: T,
    pub wk: T,
    pub bk: T,
    pub wv: T,
    pub bv: T,
    pub wo: T,
    pub bo: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNormParamsG<T> {
    pub gain: T,
    pub bias: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedForwardParamsG<T> {
    pub w1: T,
    pub b1: T,
    pub w2: T,
    pub b2: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderLayerG<T> {
    pub self_attn: AttentionParamsG<T>,
    pub ln1: LayerNormParamsG<T>,
    pub ffn: FeedForwardParamsG<T>,
    pub ln2: LayerNormParamsG<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderLayerG<T> {
    pub self_attn: AttentionParamsG<T>,
    pub ln1: LayerNormParamsG<T>,
    pub cross_attn: AttentionParamsG<T>,
    pub ln2: LayerNormParamsG<T>,
    pub ffn: FeedForwardParamsG<T>,
    pub ln3: LayerNormParamsG<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParamsG<T> {
    pub src_tok_embed: T,
    pub src_pos_embed: T,
    pub tgt_tok_embed: T,
    pub tgt_pos_embed: T,
    pub encoder: Vec<EncoderLayerG<T>>,
    pub decoder: Vec<DecoderLayerG<T>>,
    pub out_w: T,
    pub out_b: T,
}

pub type ModelParams = ModelParamsG<Tensor>;

impl<T> ModelParamsG<T> {
    /// Construct the full structure by calling `f(name, shape)` for every
    /// parameter in canonical order. `flatten` visits the same order.
    pub fn from_fn(cfg: &ModelConfig, f: &mut impl FnMut(&str, Vec<usize>) -> T) -> Self {
        let d = cfg.embedding_dim;
        let ff = cfg.feedforward_dim;
        let attn = |f: &mut dyn FnMut(&str, Vec<usize>) -> T, prefix: &str| AttentionParamsG {
            wq: f(&format!("{prefix}.wq"), vec![d, d]),
            bq: f(&format!("{prefix}.bq"), vec![d]),
            wk: f(&format!("{prefix}.wk"), vec![d, d]),
            bk: f(&format!("{prefix}.bk"), vec![d]),
            wv: f(&format!("{prefix}.wv"), vec![d, d]),
            bv: f(&format!("{prefix}.bv"), vec![d]),
            wo: f(&format!("{prefix}.wo"), vec![d, d]),
            bo: f(&format!("{prefix}.bo"), vec![d]),
        };
        let norm = |f: &mut dyn FnMut(&str, Vec<usize>) -> T, prefix: &str| LayerNormParamsG {
            gain: f(&format!("{prefix}.gain"), vec![d]),
            bias: f(&format!("{prefix}.bias"), vec![d]),
        };
        let ffn = |f: &mut dyn FnMut(&str, Vec<usize>) -> T, prefix: &str| FeedForwardParamsG {
            w1: f(&format!("{prefix}.w1"), vec![d, ff]),
            b1: f(&format!("{prefix}.b1"), vec![ff]),
            w2: f(&format!("{prefix}.w2"), vec![ff, d]),
            b2: f(&format!("{prefix}.b2"), vec![d]),
        };

        ModelParamsG {
            src_tok_embed: f("src_tok_embed", vec![cfg.source_vocab_size, d]),
            src_pos_embed: f("src_pos_embed", vec![cfg.max_source_length, d]),
            tgt_tok_embed: f("tgt_tok_embed", vec![cfg.target_vocab_size, d]),
            tgt_pos_embed: f("tgt_pos_embed", vec![cfg.max_target_length, d]),
            encoder: (0..cfg.encoder_layers)
                .map(|l| EncoderLayerG {
                    self_attn: attn(f, &format!("enc{l}.self")),
                    ln1: norm(f, &format!("enc{l}.ln1")),
                    ffn: ffn(f, &format!("enc{l}.ffn")),
                    ln2: norm(f, &format!("enc{l}.ln2")),
                })
                .collect(),
            decoder: (0..cfg.decoder_layers)
                .map(|l| DecoderLayerG {
                    self_attn: attn(f, &format!("dec{l}.self")),
                    ln1: norm(f, &format!("dec{l}.ln1")),
                    cross_attn: attn(f, &format!("dec{l}.cross")),
                    ln2: norm(f, &format!("dec{l}.ln2")),
                    ffn: ffn(f, &format!("dec{l}.ffn")),
                    ln3: norm(f, &format!("dec{l}.ln3")),
                })
                .collect(),
            out_w: f("out_w", vec![d, cfg.target_vocab_size]),
            out_b: f("out_b", vec![cfg.target_vocab_size]),
        }
    }

    /// Every parameter in the canonical order of [`ModelParamsG::from_fn`].
    pub fn flatten(&self) -> Vec<&T> {
        fn attn<'a, T>(out: &mut Vec<&'a T>, a: &'a AttentionParamsG<T>) {
            out.extend([&a.wq, &a.bq, &a.wk, &a.bk, &a.wv, &a.bv, &a.wo, &a.bo]);
        }
        fn norm<'a, T>(out: &mut Vec<&'a T>, n: &'a LayerNormParamsG<T>) {
            out.extend([&n.gain, &n.bias]);
        }
        fn ffn<'a, T>(out: &mut Vec<&'a T>, x: &'a FeedForwardParamsG<T>) {
            out.extend([&x.w1, &x.b1, &x.w2, &x.b2]);
        }
        let mut out = Vec::new();
        out.extend([&self.src_tok_embed, &self.src_pos_embed, &self.tgt_tok_embed, &self.tgt_pos_embed]);
        for l in &self.encoder {
            attn(&mut out, &l.self_attn);
            norm(&mut out, &l.ln1);
            ffn(&mut out, &l.ffn);
            norm(&mut out, &l.ln2);
        }
        for l in &self.decoder {
            attn(&mut out, &l.self_attn);
            norm(&mut out, &l.ln1);
            attn(&mut out, &l.cross_attn);
            norm(&mut out, &l.ln2);
            ffn(&mut out, &l.ffn);
            norm(&mut out, &l.ln3);
        }
        out.extend([&self.out_w, &self.out_b]);
        out
    }

    pub fn flatten_mut(&mut self) -> Vec<&mut T> {
        fn attn<'a, T>(out: &mut Vec<&'a mut T>, a: &'a mut AttentionParamsG<T>) {
            out.extend([
                &mut a.wq, &mut a.bq, &mut a.wk, &mut a.bk, &mut a.wv, &mut a.bv, &mut a.wo,
                &mut a.bo,
            ]);
        }
        fn norm<'a, T>(out: &mut Vec<&'a mut T>, n: &'a mut LayerNormParamsG<T>) {
            out.extend([&mut n.gain, &mut n.bias]);
        }
        fn ffn<'a, T>(out: &mut Vec<&'a mut T>, x: &'a mut FeedForwardParamsG<T>) {
            out.extend([&mut x.w1, &mut x.b1, &mut x.w2, &mut x.b2]);
        }
        let mut out = Vec::new();
        out.extend([
            &mut self.src_tok_embed,
            &mut self.src_pos_embed,
            &mut self.tgt_tok_embed,
            &mut self.tgt_pos_embed,
        ]);
        for l in &mut self.encoder {
            attn(&mut out, &mut l.self_attn);
            norm(&mut out, &mut l.ln1);
            ffn(&mut out, &mut l.ffn);
            norm(&mut out, &mut l.ln2);
        }
        for l in &mut self.decoder {
            attn(&mut out, &mut l.self_attn);
            norm(&mut out, &mut l.ln1);
            attn(&mut out, &mut l.cross_attn);
            norm(&mut out, &mut l.ln2);
            ffn(&mut out, &mut l.ffn);
            norm(&mut out, &mut l.ln3);
        }
        out.extend([&mut self.out_w, &mut self.out_b]);
        out
    }
}

/// Parameter names in canonical order, for logs and embedding loaders.
pub fn param_names(cfg: &ModelConfig) -> Vec<String> {
    let mut names = Vec::new();
    ModelParamsG::from_fn(cfg, &mut |name, _| names.push(name.to_string()));
    names
}

impl ModelParams {
    /// Initialize weights uniform in (-1/sqrt(fan_in), +1/sqrt(fan_in))
    /// where fan_in is a matrix's first dimension; biases start at zero and
    /// layer-norm gains at one.
    pub fn init(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        Ok(ModelParamsG::from_fn(cfg, &mut |name, shape| init_tensor(name, shape, rng)))
    }

    /// Rebuild the structure from a flat tensor list in canonical order
    /// (shape-checked against the config).
    pub fn from_flat(cfg: &ModelConfig, flat: &[Tensor]) -> Result<Self> {
        let mut iter = flat.iter();
        let mut missing = false;
        let params = ModelParamsG::from_fn(cfg, &mut |_, shape| match iter.next() {
            Some(t) if t.shape() == shape.as_slice() => t.clone(),
            _ => {
                missing = true;
                Tensor::zeros(shape)
            }
        });
        if missing || iter.next().is_some() {
            return Err(Error::invalid("flat parameter list does not match config"));
        }
        Ok(params)
    }

    pub fn shapes(cfg: &ModelConfig) -> Vec<Vec<usize>> {
        let mut shapes = Vec::new();
        ModelParamsG::from_fn(cfg, &mut |_, shape| shapes.push(shape));
        shapes
    }

    pub fn all_finite(&self) -> bool {
        self.flatten().iter().all(|t| t.all_finite())
    }
}

fn init_tensor(name: &str, shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
    let is_gain = name.ends_with(".gain");
    let is_bias = shape.len() == 1;
    if is_gain {
        let n = shape[0];
        return Tensor::from_vec(shape, vec![1.0; n]).unwrap();
    }
    if is_bias {
        return Tensor::zeros(shape);
    }
    let bound = 1.0 / (shape[0] as f64).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::from_vec(shape, data).unwrap()
}
