//! Entity-pair extraction from decoder cross-attention: attention weights
//! are propagated one hop over the sentence's dependency graph, noun chunks
//! are scored with a stop-word-aware sum, and the two highest-scoring
//! chunks become the relation's entity pair.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{Instance, Span};
use crate::error::{Error, Result};
use crate::relation::RelationEdge;
use crate::transformer::{Checkpoint, Vocabulary};

/// Propagated per-token weights for one relation token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenWeightVector {
    pub relation: String,
    pub weights: Vec<f64>,
}

/// A noun chunk's accumulated attention weight for one relation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkScore {
    pub span: Span,
    pub score: f64,
}

/// Which attention head drives extraction, plus the stop-word list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub layer: usize,
    pub head: usize,
    pub stop_words: BTreeSet<String>,
}

/// One extracted triplet: subject and object chunks for a relation type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedTriplet {
    pub id: String,
    pub relation: String,
    pub subject: Span,
    pub object: Span,
    pub subject_text: String,
    pub object_text: String,
}

/// w_i = 2 a_i + sum of a_j over dependency neighbors j of i. Tokens with
/// no neighbors get twice their own attention.
pub fn propagate_weights(
    relation: &str,
    attention: &[f64],
    dep_edges: &[(usize, usize)],
) -> Result<TokenWeightVector> {
    let n = attention.len();
    let mut neighbors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(a, b) in dep_edges {
        if a >= n || b >= n {
            return Err(Error::invalid(format!(
                "dependency edge ({a},{b}) out of range for {n} tokens"
            )));
        }
        if a == b {
            return Err(Error::invalid(format!("self-loop at token {a} in dependency graph")));
        }
        neighbors[a].insert(b);
        neighbors[b].insert(a);
    }
    let weights = (0..n)
        .map(|i| 2.0 * attention[i] + neighbors[i].iter().map(|&j| attention[j]).sum::<f64>())
        .collect();
    Ok(TokenWeightVector { relation: relation.to_string(), weights })
}

/// Per-chunk score: sum over chunk tokens of f(w), where f doubles the
/// weight of non-stop-words. Output keeps chunk position order.
pub fn score_chunks(
    w: &TokenWeightVector,
    chunks: &[Span],
    tokens: &[String],
    stop_words: &BTreeSet<String>,
) -> Result<Vec<ChunkScore>> {
    if tokens.len() != w.weights.len() {
        return Err(Error::invalid(format!(
            "{} tokens vs {} weights",
            tokens.len(),
            w.weights.len()
        )));
    }
    let mut sorted: Vec<&Span> = chunks.iter().collect();
    sorted.sort();
    for pair in sorted.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(Error::invalid(format!(
                "overlapping noun chunks {:?} and {:?}",
                pair[0], pair[1]
            )));
        }
    }
    let mut scores = Vec::with_capacity(chunks.len());
    for &span in sorted {
        if span.1 > tokens.len() || span.0 >= span.1 {
            return Err(Error::invalid(format!("chunk {span:?} out of bounds")));
        }
        let score = (span.0..span.1)
            .map(|j| {
                let wj = w.weights[j];
                if stop_words.contains(&tokens[j]) {
                    wj
                } else {
                    2.0 * wj
                }
            })
            .sum();
        scores.push(ChunkScore { span, score });
    }
    Ok(scores)
}

/// The two top-scoring chunks form the entity pair; ties break toward the
/// earlier chunk, and the earlier of the two winners becomes the subject.
pub fn extract_triplet(scores: &[ChunkScore], relation: &str) -> Result<(Span, String, Span)> {
    if scores.len() < 2 {
        return Err(Error::invalid(format!(
            "cannot form pair for {relation:?}: {} chunk(s)",
            scores.len()
        )));
    }
    let mut ranked: Vec<(usize, &ChunkScore)> = scores.iter().enumerate().collect();
    // Stable sort by descending score keeps earlier chunks ahead on ties.
    ranked.sort_by(|a, b| b.1.score.partial_cmp(&a.1.score).unwrap());
    let (mut first, mut second) = (ranked[0].1.span, ranked[1].1.span);
    if second < first {
        std::mem::swap(&mut first, &mut second);
    }
    Ok((first, relation.to_string(), second))
}

/// Per-instance extraction output.
#[derive(Debug, Clone)]
pub struct InstanceExtraction {
    pub relations: BTreeSet<RelationEdge>,
    pub triplets: Vec<ExtractedTriplet>,
    pub skipped: Vec<String>,
}

/// Predict an instance's relations with the checkpoint, then extract one
/// entity pair per predicted relation from the configured attention head.
pub fn extract_instance(
    checkpoint: &Checkpoint,
    instance: &Instance,
    config: &ExtractionConfig,
) -> Result<InstanceExtraction> {
    if instance.dep_edges.is_empty() || instance.noun_chunks.is_empty() {
        return Err(Error::invalid(format!(
            "instance {:?} lacks dependency edges or noun chunks",
            instance.id
        )));
    }
    let prediction = checkpoint.predict_instance(instance)?;
    let mut triplets = Vec::new();
    let mut skipped = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (step, &token_id) in prediction.decode.tokens.iter().enumerate() {
        if Vocabulary::is_special(token_id) {
            continue;
        }
        let Some(relation) = checkpoint.target_vocab.token(token_id) else {
            continue;
        };
        if !seen.insert(relation.to_string()) {
            continue;
        }
        let Some(attention) = step_attention_row(
            &prediction.decode.steps[step],
            config.layer,
            config.head,
            instance.tokens.len(),
        ) else {
            skipped.push(format!(
                "instance {:?}: no attention at layer {} head {}",
                instance.id, config.layer, config.head
            ));
            continue;
        };
        if instance.noun_chunks.len() < 2 {
            skipped.push(format!(
                "instance {:?}: fewer than 2 noun chunks",
                instance.id
            ));
            continue;
        }
        let w = propagate_weights(relation, &attention, &instance.dep_edges)?;
        let scores =
            score_chunks(&w, &instance.noun_chunks, &instance.tokens, &config.stop_words)?;
        let (subject, rel, object) = extract_triplet(&scores, relation)?;
        triplets.push(ExtractedTriplet {
            id: instance.id.clone(),
            relation: rel,
            subject,
            object,
            subject_text: instance.chunk_text(subject),
            object_text: instance.chunk_text(object),
        });
    }
    Ok(InstanceExtraction { relations: prediction.relations, triplets, skipped })
}

/// Pull the [1, sos+text+eos] cross-attention row for (layer, head) and
/// strip the marker columns so it aligns with the instance tokens.
fn step_attention_row(
    step: &crate::transformer::StepAttention,
    layer: usize,
    head: usize,
    token_count: usize,
) -> Option<Vec<f64>> {
    let rec = step.records.iter().find(|r| r.layer == layer && r.head == head)?;
    let row = rec.weights.row(0);
    // Source was <sos> tokens <eos>, possibly truncated; take what overlaps.
    let body = &row[1..row.len().saturating_sub(1)];
    let mut out = vec![0.0; token_count];
    for (i, &v) in body.iter().take(token_count).enumerate() {
        out[i] = v;
    }
    Some(out)
}

/// Grid-search every (layer, head) on labeled instances and keep the config
/// with the best entity-pair accuracy; ties go to the lowest (layer, head).
pub fn select_best_head(
    checkpoint: &Checkpoint,
    labeled: &[Instance],
    stop_words: &BTreeSet<String>,
) -> Result<(ExtractionConfig, f64)> {
    if labeled.is_empty() {
        return Err(Error::invalid("no labeled instances for head selection"));
    }
    let layers = checkpoint.model.config.decoder_layers;
    let heads = checkpoint.model.config.attention_heads;
    let mut best: Option<(ExtractionConfig, f64)> = None;
    for layer in 0..layers {
        for head in 0..heads {
            let config = ExtractionConfig { layer, head, stop_words: stop_words.clone() };
            let accuracy = pair_accuracy(checkpoint, labeled, &config)?;
            let better = match &best {
                None => true,
                Some((_, acc)) => accuracy > *acc,
            };
            if better {
                best = Some((config, accuracy));
            }
        }
    }
    let (config, accuracy) = best.unwrap();
    if accuracy == 0.0 {
        log::warn!("no attention head recovered any gold pair; defaulting to (0, 0)");
        return Ok((
            ExtractionConfig { layer: 0, head: 0, stop_words: stop_words.clone() },
            0.0,
        ));
    }
    Ok((config, accuracy))
}

/// Fraction of gold triplets whose unordered entity pair is recovered.
fn pair_accuracy(
    checkpoint: &Checkpoint,
    labeled: &[Instance],
    config: &ExtractionConfig,
) -> Result<f64> {
    let mut total = 0usize;
    let mut hit = 0usize;
    for inst in labeled {
        if inst.triplets.is_empty() {
            return Err(Error::invalid(format!("instance {:?} carries no gold triplets", inst.id)));
        }
        let extraction = match extract_instance(checkpoint, inst, config) {
            Ok(e) => e,
            Err(Error::InvalidInput(_)) => InstanceExtraction {
                relations: BTreeSet::new(),
                triplets: Vec::new(),
                skipped: Vec::new(),
            },
            Err(e) => return Err(e),
        };
        let extracted_pairs: BTreeSet<(String, String)> = extraction
            .triplets
            .iter()
            .map(|t| unordered_pair(&t.subject_text, &t.object_text))
            .collect();
        for gold in &inst.triplets {
            total += 1;
            let pair = unordered_pair(
                &crate::dataset::tokenize(&gold.subject).join(" "),
                &crate::dataset::tokenize(&gold.object).join(" "),
            );
            if extracted_pairs.contains(&pair) {
                hit += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::invalid("labeled set carries no triplets"));
    }
    Ok(hit as f64 / total as f64)
}

fn unordered_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}
