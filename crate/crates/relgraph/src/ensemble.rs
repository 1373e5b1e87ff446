//! Ensembles of transformers trained under different relation orderings,
//! fused by per-relation consensus voting (wisdom of crowds).

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::CorpusSplits;
use crate::error::{Error, Result};
use crate::relation::{enumerate_orderings, EntityType, RelationEdge};
use crate::tensor::SeedStreams;
use crate::transformer::{train, Checkpoint, ModelConfig, TrainConfig};

/// How ensemble members pick their BFS start nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemberSelection {
    /// Explicit start nodes, one member each.
    Starts(Vec<EntityType>),
    /// Train one member per ordering, keep the k with the best validation
    /// exact-set accuracy.
    TopK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub k: usize,
    pub selection: MemberSelection,
    /// Consensus inclusion threshold in (0, 1].
    pub theta: f64,
}

impl EnsembleConfig {
    pub fn top_k(k: usize) -> Self {
        EnsembleConfig { k, selection: MemberSelection::TopK, theta: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("ensemble needs at least one member"));
        }
        if !(0.0..=1.0).contains(&self.theta) || self.theta == 0.0 {
            return Err(Error::invalid(format!("theta {} outside (0, 1]", self.theta)));
        }
        if let MemberSelection::Starts(starts) = &self.selection {
            if starts.len() != self.k {
                return Err(Error::invalid(format!(
                    "{} start nodes for k={}",
                    starts.len(),
                    self.k
                )));
            }
            let unique: BTreeSet<&EntityType> = starts.iter().collect();
            if unique.len() != starts.len() {
                return Err(Error::invalid("duplicate ensemble start nodes"));
            }
        }
        Ok(())
    }
}

/// One member's predicted relation set for one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub instance_id: String,
    pub member: String,
    pub relations: BTreeSet<RelationEdge>,
}

/// Train k transformers, one per BFS ordering. Members get the same splits,
/// their own ordering, and a sub-seed derived from the start node name.
/// With top-k selection every ordering is trained and the k best validation
/// exact-set accuracies are kept.
pub fn train_ensemble(
    splits: &CorpusSplits,
    config: &EnsembleConfig,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    seed: u64,
) -> Result<Vec<Checkpoint>> {
    config.validate()?;
    let general = splits.train.general_metagraph()?;
    let orderings = enumerate_orderings(&general)?;
    if config.k > orderings.len() {
        return Err(Error::invalid(format!(
            "k={} exceeds the {} available orderings",
            config.k,
            orderings.len()
        )));
    }

    let wanted: Vec<(EntityType, crate::relation::RelationVocabulary)> = match &config.selection {
        MemberSelection::Starts(starts) => {
            let mut picked = Vec::with_capacity(starts.len());
            for s in starts {
                let found = orderings
                    .iter()
                    .find(|(n, _)| n == s)
                    .ok_or_else(|| {
                        Error::invalid(format!("start node {s:?} not in the general metagraph"))
                    })?
                    .clone();
                picked.push(found);
            }
            picked
        }
        MemberSelection::TopK => orderings,
    };

    let streams = SeedStreams::new(seed);
    let mut members: Vec<(f64, Checkpoint)> = Vec::with_capacity(wanted.len());
    for (start, ordering) in &wanted {
        let member_seed = streams.child_seed(&format!("member-{start}"));
        let outcome =
            train(splits, model_config, train_config, ordering, member_seed).map_err(|e| {
                match e {
                    Error::Divergence(msg) => {
                        Error::Divergence(format!("member {start}: {msg}"))
                    }
                    other => other,
                }
            })?;
        let accuracy = outcome.checkpoint.exact_set_accuracy(&splits.valid.instances)?;
        members.push((accuracy, outcome.checkpoint));
    }

    if matches!(config.selection, MemberSelection::TopK) {
        // Stable: ties keep enumeration (lexicographic start) order.
        members.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        members.truncate(config.k);
    }
    Ok(members.into_iter().map(|(_, ck)| ck).collect())
}

/// Wisdom-of-crowds consensus over one instance's prediction sets: a
/// relation is included iff votes/k >= theta. Ordering metadata plays no
/// role; members vote on each relation separately.
pub fn woc_consensus(
    predictions: &[PredictionSet],
    theta: f64,
) -> Result<BTreeSet<RelationEdge>> {
    if predictions.is_empty() {
        return Err(Error::invalid("consensus over zero prediction sets"));
    }
    let id = &predictions[0].instance_id;
    if predictions.iter().any(|p| &p.instance_id != id) {
        return Err(Error::invalid("mixed instance ids in consensus input"));
    }
    let k = predictions.len() as f64;
    let mut votes: BTreeMap<&RelationEdge, usize> = BTreeMap::new();
    for p in predictions {
        for r in &p.relations {
            *votes.entry(r).or_insert(0) += 1;
        }
    }
    Ok(votes
        .into_iter()
        .filter(|(_, v)| *v as f64 / k >= theta)
        .map(|(r, _)| r.clone())
        .collect())
}

/// Write prediction sets as JSONL for offline consensus replay.
pub fn save_predictions(predictions: &[PredictionSet], path: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        id: &'a str,
        member: &'a str,
        relations: Vec<String>,
    }
    let mut file = std::fs::File::create(path)?;
    for p in predictions {
        let row = Row {
            id: &p.instance_id,
            member: &p.member,
            relations: p.relations.iter().map(|r| r.token()).collect::<Result<_>>()?,
        };
        serde_json::to_writer(&mut file, &row).map_err(|e| Error::invalid(e.to_string()))?;
        file.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_predictions(path: &Path, directed: bool) -> Result<Vec<PredictionSet>> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        member: String,
        relations: Vec<String>,
    }
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line)
            .map_err(|e| Error::Jsonl { line: i + 1, msg: e.to_string() })?;
        let relations = row
            .relations
            .iter()
            .map(|t| RelationEdge::parse(t, directed))
            .collect::<Result<_>>()?;
        out.push(PredictionSet { instance_id: row.id, member: row.member, relations });
    }
    Ok(out)
}
