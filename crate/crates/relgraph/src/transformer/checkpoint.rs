//! Versioned checkpoint container. Serialization goes through canonical
//! JSON, which round-trips every finite f64 bit-exactly and is byte-stable
//! for identical inputs.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{DecodeOutput, Model};
use super::train::encode_source;
use super::vocab::Vocabulary;
use crate::dataset::Instance;
use crate::error::{Error, Result};
use crate::relation::{RelationEdge, RelationVocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub final_train_loss: f64,
    pub best_valid_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model: Model,
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
    pub ordering: RelationVocabulary,
    pub directed: bool,
    pub metadata: TrainingMetadata,
}

/// A decoded relation set for one instance.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub relations: BTreeSet<RelationEdge>,
    pub decode: DecodeOutput,
}

impl Checkpoint {
    pub const FORMAT_VERSION: u32 = 1;

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)
            .map_err(|e| Error::invalid(format!("cannot serialize checkpoint: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let ck: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::invalid(format!("cannot parse checkpoint: {e}")))?;
        if ck.format_version != Self::FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "checkpoint format version {} unsupported (expected {})",
                ck.format_version,
                Self::FORMAT_VERSION
            )));
        }
        ck.model.config.validate()?;
        Ok(ck)
    }

    /// The BFS start node this member was trained under, if any.
    pub fn start_node(&self) -> Option<&str> {
        match &self.ordering.ordering {
            crate::relation::OrderingKind::Bfs { start } => Some(start.as_str()),
            crate::relation::OrderingKind::Unordered => None,
        }
    }

    /// Greedy-decode the relation set for one instance. Sources longer than
    /// the positional table are truncated with a warning.
    pub fn predict_instance(&self, instance: &Instance) -> Result<Prediction> {
        let mut src = encode_source(instance, &self.source_vocab);
        let cap = self.model.config.max_source_length;
        if src.len() > cap {
            log::warn!(
                "instance {:?}: source of {} tokens truncated to {cap}",
                instance.id,
                src.len()
            );
            src.truncate(cap - 1);
            src.push(super::vocab::EOS_ID);
        }
        let decode = self.model.predict_ids(&src, self.model.config.max_target_length - 1)?;
        let mut relations = BTreeSet::new();
        for &id in &decode.tokens {
            if Vocabulary::is_special(id) {
                continue;
            }
            if let Some(token) = self.target_vocab.token(id) {
                relations.insert(RelationEdge::parse(token, self.directed)?);
            }
        }
        Ok(Prediction { relations, decode })
    }

    /// Fraction of instances whose predicted relation set equals the gold
    /// set exactly.
    pub fn exact_set_accuracy(&self, instances: &[Instance]) -> Result<f64> {
        if instances.is_empty() {
            return Err(Error::invalid("no instances to score"));
        }
        let mut hits = 0usize;
        for inst in instances {
            if self.predict_instance(inst)?.relations == inst.relation_set() {
                hits += 1;
            }
        }
        Ok(hits as f64 / instances.len() as f64)
    }
}
