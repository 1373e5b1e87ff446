//! Teacher-forced training with Adam, global-norm clipping, and
//! early stopping on validation loss.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, TrainingMetadata};
use super::model::{teacher_pair, Model};
use super::vocab::{Vocabulary, EOS_ID, SOS_ID};
use super::ModelConfig;
use crate::dataset::{Corpus, CorpusSplits, Instance};
use crate::error::{Error, Result};
use crate::relation::{sort_target_sequence, RelationVocabulary};
use crate::tensor::{clip_global_norm, AdamOptimizer, SeedStreams, Tensor};

/// Optimization settings. Architecture lives in [`ModelConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub clip_norm: f64,
    /// Re-shuffle each instance's target sequence every epoch instead of
    /// using the vocabulary ordering. Baseline mode for ordering
    /// experiments.
    pub shuffle_targets_each_epoch: bool,
    /// Stop as soon as validation token loss drops to this value.
    pub valid_loss_target: Option<f64>,
    /// Word-vector file overriding the random init of matching source
    /// embeddings before training starts.
    pub pretrained_embeddings: Option<std::path::PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.0005,
            batch_size: 32,
            max_epochs: 100,
            patience: 5,
            clip_norm: 1.0,
            shuffle_targets_each_epoch: false,
            valid_loss_target: None,
            pretrained_embeddings: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochStats>,
}

struct Prepared {
    id: String,
    src: Vec<usize>,
    target: Vec<usize>,
}

fn prepare(
    corpus: &Corpus,
    source_vocab: &Vocabulary,
    target_vocab: &Vocabulary,
    ordering: &RelationVocabulary,
) -> Result<Vec<Prepared>> {
    corpus
        .instances
        .iter()
        .map(|inst| {
            let src = encode_source(inst, source_vocab);
            let tokens = sort_target_sequence(&inst.relations, ordering)?;
            let target = tokens
                .iter()
                .map(|t| {
                    target_vocab.id(t).ok_or_else(|| {
                        Error::VocabMismatch(format!("relation token {t:?} not in target vocabulary"))
                    })
                })
                .collect::<Result<Vec<usize>>>()?;
            Ok(Prepared { id: inst.id.clone(), src, target })
        })
        .collect()
}

/// Source token ids with start/end markers.
pub fn encode_source(instance: &Instance, vocab: &Vocabulary) -> Vec<usize> {
    let mut ids = Vec::with_capacity(instance.tokens.len() + 2);
    ids.push(SOS_ID);
    ids.extend(instance.tokens.iter().map(|t| vocab.id_or_unk(t)));
    ids.push(EOS_ID);
    ids
}

/// Train a transformer on the train split, early-stopping on the validation
/// split, and return the best-validation checkpoint.
///
/// The base config's vocabulary sizes and maximum lengths are fitted to the
/// data (max of the base value and what the splits require).
pub fn train(
    splits: &CorpusSplits,
    base_config: &ModelConfig,
    train_config: &TrainConfig,
    ordering: &RelationVocabulary,
    seed: u64,
) -> Result<TrainOutcome> {
    if splits.train.is_empty() {
        return Err(Error::invalid("empty train split"));
    }
    if train_config.batch_size == 0 || train_config.max_epochs == 0 {
        return Err(Error::invalid("batch size and epoch cap must be positive"));
    }

    let source_vocab =
        Vocabulary::from_corpus_tokens(splits.train.instances.iter().map(|i| i.tokens.as_slice()))?;
    let target_vocab = Vocabulary::new(ordering.tokens().iter().cloned())?;

    let mut config = base_config.clone();
    config.source_vocab_size = source_vocab.len();
    config.target_vocab_size = target_vocab.len();
    let longest_src = splits
        .train
        .instances
        .iter()
        .chain(&splits.valid.instances)
        .map(|i| i.tokens.len() + 2)
        .max()
        .unwrap_or(2);
    let longest_tgt = splits
        .train
        .instances
        .iter()
        .chain(&splits.valid.instances)
        .map(|i| i.relations.len() + 1)
        .max()
        .unwrap_or(2);
    config.max_source_length = config.max_source_length.max(longest_src);
    config.max_target_length = config.max_target_length.max(longest_tgt + 1);
    config.validate()?;

    let mut train_set = prepare(&splits.train, &source_vocab, &target_vocab, ordering)?;
    let valid_set = prepare(&splits.valid, &source_vocab, &target_vocab, ordering)?;

    let streams = SeedStreams::new(seed);
    let mut init_rng = streams.stream("init");
    let mut shuffle_rng = streams.stream("shuffle");
    let mut dropout_rng = streams.stream("dropout");
    let mut target_rng = streams.stream("target-shuffle");

    let mut model = Model::init(config.clone(), &mut init_rng)?;
    if let Some(path) = &train_config.pretrained_embeddings {
        let matched =
            super::embeddings::load_pretrained_embeddings(path, &source_vocab, &mut model.params)?;
        log::info!("pretrained embeddings: matched {matched} source tokens");
    }
    let shapes = super::params::ModelParams::shapes(&config);
    let mut adam = AdamOptimizer::new(train_config.learning_rate, &shapes);

    let mut history: Vec<EpochStats> = Vec::new();
    let mut best_params = model.params.clone();
    let mut best_valid = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut since_best = 0usize;

    for epoch in 0..train_config.max_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut shuffle_rng);
        if train_config.shuffle_targets_each_epoch {
            for p in train_set.iter_mut() {
                p.target.shuffle(&mut target_rng);
            }
        }

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(train_config.batch_size) {
            let mut acc: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(s.clone())).collect();
            let weight = 1.0 / chunk.len() as f64;
            let mut batch_loss = 0.0;
            for &idx in chunk {
                let p = &train_set[idx];
                let (tgt_in, tgt_out) = teacher_pair(&p.target);
                let (loss, grads) = model.training_loss_and_grads(
                    &p.src,
                    &tgt_in,
                    &tgt_out,
                    Some(&mut dropout_rng),
                )?;
                if !loss.is_finite() {
                    return Err(Error::Divergence(format!(
                        "non-finite loss at epoch {epoch}, instance {:?}",
                        p.id
                    )));
                }
                batch_loss += loss;
                for (a, g) in acc.iter_mut().zip(&grads) {
                    for (av, gv) in a.data_mut().iter_mut().zip(g.data()) {
                        *av += gv * weight;
                    }
                }
            }
            clip_global_norm(&mut acc, train_config.clip_norm);
            let mut params = model.params.flatten_mut();
            adam.step(&mut params, &acc)?;
            epoch_loss += batch_loss / chunk.len() as f64;
            batches += 1;
        }
        let train_loss = epoch_loss / batches.max(1) as f64;
        if !model.params.all_finite() {
            return Err(Error::Divergence(format!("non-finite parameters after epoch {epoch}")));
        }

        let valid_loss = token_loss(&model, &valid_set)?;
        history.push(EpochStats { epoch, train_loss, valid_loss });

        if valid_loss < best_valid {
            best_valid = valid_loss;
            best_params = model.params.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if let Some(target) = train_config.valid_loss_target {
            if valid_loss <= target {
                break;
            }
        }
        if since_best >= train_config.patience {
            break;
        }
    }

    let final_train_loss = history.last().map(|h| h.train_loss).unwrap_or(0.0);
    model.params = best_params;
    let checkpoint = Checkpoint {
        format_version: Checkpoint::FORMAT_VERSION,
        model,
        source_vocab,
        target_vocab,
        ordering: ordering.clone(),
        directed: splits.train.config.directed,
        metadata: TrainingMetadata {
            seed,
            epochs_run: history.len(),
            best_epoch,
            final_train_loss,
            best_valid_loss: best_valid,
        },
    };
    Ok(TrainOutcome { checkpoint, history })
}

/// Pooled token-level mean NLL over a prepared set, in inference mode.
fn token_loss(model: &Model, set: &[Prepared]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for p in set {
        let loss = model.teacher_forced_loss(&p.src, &p.target)?;
        let tokens = p.target.len() + 1; // payload plus end marker
        total += loss * tokens as f64;
        count += tokens;
    }
    if count == 0 {
        return Err(Error::invalid("validation set has no supervised tokens"));
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_synthetic;
    use crate::relation::bfs_ordering;

    fn memorization_setup() -> (CorpusSplits, RelationVocabulary) {
        let corpus = generate_synthetic(3, 2, 1, 5).unwrap();
        let g = corpus.general_metagraph().unwrap();
        let start = g.nodes().next().unwrap().clone();
        let ordering = bfs_ordering(&g, &start).unwrap();
        let splits = CorpusSplits {
            train: corpus.clone(),
            valid: corpus.clone(),
            test: corpus,
        };
        (splits, ordering)
    }

    fn small_model_config() -> ModelConfig {
        let mut cfg = ModelConfig::new(4, 4);
        cfg.embedding_dim = 32;
        cfg.attention_heads = 2;
        cfg.feedforward_dim = 64;
        cfg
    }

    #[test]
    fn memorizes_single_instance() {
        let (splits, ordering) = memorization_setup();
        let tc = TrainConfig {
            learning_rate: 0.01,
            batch_size: 1,
            max_epochs: 200,
            patience: 200,
            valid_loss_target: Some(0.005),
            ..TrainConfig::default()
        };
        let out = train(&splits, &small_model_config(), &tc, &ordering, 7).unwrap();
        let final_loss = out.history.last().unwrap().train_loss;
        assert!(final_loss < 0.01, "loss {final_loss} after {} epochs", out.history.len());

        // Greedy decode reproduces the memorized target exactly.
        let ck = &out.checkpoint;
        let inst = &splits.train.instances[0];
        let pred = ck.predict_instance(inst).unwrap();
        assert_eq!(pred.relations, inst.relation_set());
        assert!(!pred.decode.truncated);
    }

    #[test]
    fn identical_seeds_give_identical_checkpoints() {
        let (splits, ordering) = memorization_setup();
        let tc = TrainConfig { max_epochs: 3, batch_size: 1, ..TrainConfig::default() };
        let cfg = small_model_config();
        let a = train(&splits, &cfg, &tc, &ordering, 42).unwrap();
        let b = train(&splits, &cfg, &tc, &ordering, 42).unwrap();
        let ja = serde_json::to_vec(&a.checkpoint).unwrap();
        let jb = serde_json::to_vec(&b.checkpoint).unwrap();
        assert_eq!(ja, jb);
        // Losses match bitwise across the run.
        for (ha, hb) in a.history.iter().zip(&b.history) {
            assert_eq!(ha.train_loss.to_bits(), hb.train_loss.to_bits());
            assert_eq!(ha.valid_loss.to_bits(), hb.valid_loss.to_bits());
        }
    }

    #[test]
    fn different_seeds_diverge() {
        let (splits, ordering) = memorization_setup();
        let tc = TrainConfig { max_epochs: 2, batch_size: 1, ..TrainConfig::default() };
        let cfg = small_model_config();
        let a = train(&splits, &cfg, &tc, &ordering, 1).unwrap();
        let b = train(&splits, &cfg, &tc, &ordering, 2).unwrap();
        assert_ne!(
            a.history.last().unwrap().train_loss.to_bits(),
            b.history.last().unwrap().train_loss.to_bits()
        );
    }

    #[test]
    fn empty_train_split_is_error() {
        let (mut splits, ordering) = memorization_setup();
        splits.train.instances.clear();
        let tc = TrainConfig::default();
        assert!(train(&splits, &small_model_config(), &tc, &ordering, 1).is_err());
    }

    #[test]
    fn pretrained_embeddings_seed_the_source_table() {
        let (splits, ordering) = memorization_setup();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        // Token "item00" appears in the synthetic text; give it a known row.
        let dim = 32;
        let vector: Vec<String> = (0..dim).map(|i| format!("{}", i as f64 / 10.0)).collect();
        std::fs::write(&path, format!("item00 {}\n", vector.join(" "))).unwrap();
        // Zero learning rate: parameters keep their initialization.
        let tc = TrainConfig {
            learning_rate: 0.0,
            batch_size: 1,
            max_epochs: 1,
            pretrained_embeddings: Some(path),
            ..TrainConfig::default()
        };
        let out = train(&splits, &small_model_config(), &tc, &ordering, 3).unwrap();
        let ck = &out.checkpoint;
        let id = ck.source_vocab.id("item00").unwrap();
        let row = ck.model.params.src_tok_embed.row(id);
        let expected: Vec<f64> = (0..dim).map(|i| i as f64 / 10.0).collect();
        assert_eq!(row, &expected[..]);
    }

    #[test]
    fn best_checkpoint_no_worse_than_first_epoch() {
        let (splits, ordering) = memorization_setup();
        let tc = TrainConfig {
            learning_rate: 0.01,
            batch_size: 1,
            max_epochs: 30,
            patience: 30,
            ..TrainConfig::default()
        };
        let out = train(&splits, &small_model_config(), &tc, &ordering, 3).unwrap();
        let first = out.history.first().unwrap().valid_loss;
        assert!(out.checkpoint.metadata.best_valid_loss <= first);
    }
}
