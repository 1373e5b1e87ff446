//! Command implementations behind the clap surface.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use relgraph::dataset::{
    self, filter_rare_types, generate_synthetic, load_jsonl, random_split,
    sample_subdomain_with_rng, save_jsonl, Corpus, CorpusSplits, KeywordLists, SplitSpec,
};
use relgraph::ensemble::{
    self, woc_consensus, EnsembleConfig, MemberSelection, PredictionSet,
};
use relgraph::error::{Error, Result};
use relgraph::eval::{aggregate_metagraph, evaluate_metagraph, instance_metrics};
use relgraph::extract::{extract_instance, select_best_head, ExtractionConfig};
use relgraph::relation::{bfs_ordering, EntityType, Metagraph, RelationVocabulary};
use relgraph::tensor::SeedStreams;
use relgraph::transformer::{Checkpoint, ModelConfig, TrainConfig};

use super::{
    ConvertArgs, EvaluateArgs, ExtractArgs, ModelFlags, OptimFlags, SplitFlags, SynthArgs,
    TrainArgs, TrainEnsembleArgs,
};

/// Expand `--config FILE` into the file's `key=value` lines as `--key value`
/// flags, inserted before the explicit flags so the command line wins.
/// Unknown keys fall through to clap and are rejected there.
pub fn expand_config_args(args: Vec<String>) -> Result<Vec<String>> {
    let Some(pos) = args.iter().position(|a| a == "--config") else {
        return Ok(args);
    };
    if pos < 2 {
        return Err(Error::invalid("--config must follow a subcommand"));
    }
    let path = args
        .get(pos + 1)
        .ok_or_else(|| Error::invalid("--config requires a file path"))?;
    let text = std::fs::read_to_string(path)?;
    let mut expanded: Vec<String> = args[..2].to_vec();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Jsonl {
            line: i + 1,
            msg: format!("expected key=value, got {line:?}"),
        })?;
        expanded.push(format!("--{}", key.trim().replace('_', "-")));
        let value = value.trim();
        if !value.is_empty() {
            expanded.push(value.to_string());
        }
    }
    expanded.extend(args[2..pos].iter().cloned());
    expanded.extend(args[pos + 2..].iter().cloned());
    Ok(expanded)
}

pub fn parse_fractions(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated fractions".into());
    }
    let vals: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, String>>()?;
    Ok((vals[0], vals[1], vals[2]))
}

fn print_stats(corpus: &Corpus) -> Result<()> {
    let stats = corpus.stats()?;
    println!("instances                 {}", stats.instances);
    println!("relation language size    {}", stats.relation_language_size);
    println!("mean relations/instance   {:.2}", stats.mean_relations_per_instance);
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let corpus = generate_synthetic(args.nodes, args.edges, args.instances, args.seed)?;
    save_jsonl(&corpus, &args.out)?;
    println!("wrote {}", args.out.display());
    print_stats(&corpus)
}

fn load_json_map<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

pub fn convert(args: ConvertArgs) -> Result<()> {
    let mut corpus = load_jsonl(&args.input, args.directed)?;

    if let Some(kw_path) = &args.keywords {
        let keywords: KeywordLists = load_json_map(kw_path)?;
        for inst in &mut corpus.instances {
            let (relations, warnings) = dataset::keyword_path_annotate(inst, &keywords)?;
            for w in warnings {
                log::warn!("{w}");
            }
            inst.relations = relations.into_iter().collect();
        }
    } else if args.type_map.is_some() || corpus.instances.iter().any(|i| i.relations.is_empty()) {
        let type_map: BTreeMap<String, EntityType> = match &args.type_map {
            Some(p) => {
                let raw: BTreeMap<String, String> = load_json_map(p)?;
                raw.into_iter().map(|(k, v)| (k.to_lowercase(), EntityType::new(v))).collect()
            }
            None => BTreeMap::new(),
        };
        for inst in &mut corpus.instances {
            if inst.relations.is_empty() && !inst.triplets.is_empty() {
                let rels =
                    dataset::triplets_to_relation_types(inst, &type_map, args.directed)?;
                inst.relations = rels.into_iter().collect();
            }
        }
    }

    if let Some(min_count) = args.min_count {
        let replacements: BTreeMap<String, String> = match &args.replace_map {
            Some(p) => load_json_map(p)?,
            None => BTreeMap::new(),
        };
        let (filtered, report) = filter_rare_types(&corpus, min_count, &replacements)?;
        for (tok, n) in &report.removed {
            println!("removed rare relation {tok} ({n} occurrences)");
        }
        for (from, to) in &report.replaced {
            println!("replaced rare relation {from} -> {to}");
        }
        if !report.dropped_instances.is_empty() {
            println!("dropped {} instances left without relations", report.dropped_instances.len());
        }
        corpus = filtered;
    }

    save_jsonl(&corpus, &args.out)?;
    println!("wrote {}", args.out.display());
    print_stats(&corpus)
}

fn model_config(flags: &ModelFlags) -> ModelConfig {
    let mut cfg = ModelConfig::new(4, 4); // vocab sizes are fitted at train time
    cfg.embedding_dim = flags.embed_dim;
    cfg.attention_heads = flags.heads;
    cfg.encoder_layers = flags.enc_layers;
    cfg.decoder_layers = flags.dec_layers;
    cfg.feedforward_dim = flags.ffn_dim;
    cfg.dropout_rate = flags.dropout;
    cfg
}

fn train_config(flags: &OptimFlags, shuffle_targets: bool) -> TrainConfig {
    TrainConfig {
        learning_rate: flags.lr,
        batch_size: flags.batch,
        max_epochs: flags.epochs,
        patience: flags.patience,
        shuffle_targets_each_epoch: shuffle_targets,
        ..TrainConfig::default()
    }
}

fn split_corpus(corpus: &Corpus, flags: &SplitFlags, seed: u64) -> Result<CorpusSplits> {
    let (train, valid, test) = flags.split;
    random_split(corpus, &SplitSpec { train, valid, test, seed, run_index: flags.run_index })
}

fn resolve_ordering(
    general: &Metagraph,
    ordering: &str,
    start: Option<&str>,
) -> Result<(RelationVocabulary, bool)> {
    match ordering {
        "bfs" | "shuffled" => {
            let start = match start {
                Some(s) => EntityType::new(s),
                None => general
                    .nodes()
                    .next()
                    .cloned()
                    .ok_or_else(|| Error::invalid("empty metagraph"))?,
            };
            Ok((bfs_ordering(general, &start)?, ordering == "shuffled"))
        }
        "unordered" => Ok((RelationVocabulary::unordered(general)?, false)),
        other => Err(Error::invalid(format!(
            "unknown ordering {other:?} (expected bfs, unordered, or shuffled)"
        ))),
    }
}

pub fn train(args: TrainArgs) -> Result<()> {
    let corpus = load_jsonl(&args.corpus, args.directed)?;
    let splits = split_corpus(&corpus, &args.splits, args.seed)?;
    let general = splits.train.general_metagraph()?;
    let (ordering, shuffle_targets) =
        resolve_ordering(&general, &args.ordering, args.start.as_deref())?;

    let base = model_config(&args.model);
    let mut tc = train_config(&args.optim, shuffle_targets);
    tc.pretrained_embeddings = args.embeddings.clone();
    let outcome = relgraph::transformer::train(&splits, &base, &tc, &ordering, args.seed)?;

    outcome.checkpoint.save(&args.out)?;
    let log_path = args.log.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".log");
        PathBuf::from(p)
    });
    write_training_log(&log_path, &ordering, &outcome.history)?;

    let meta = &outcome.checkpoint.metadata;
    println!(
        "trained {} epochs (best epoch {}, valid loss {:.6}); checkpoint {}",
        meta.epochs_run,
        meta.best_epoch,
        meta.best_valid_loss,
        args.out.display()
    );
    Ok(())
}

fn write_training_log(
    path: &Path,
    ordering: &RelationVocabulary,
    history: &[relgraph::transformer::EpochStats],
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let kind = match &ordering.ordering {
        relgraph::relation::OrderingKind::Bfs { start } => format!("bfs({start})"),
        relgraph::relation::OrderingKind::Unordered => "unordered".to_string(),
    };
    writeln!(f, "# ordering {kind}")?;
    writeln!(f, "# target sequence {}", ordering.tokens().join(" "))?;
    writeln!(f, "epoch\ttrain_loss\tvalid_loss")?;
    for h in history {
        writeln!(f, "{}\t{:.12}\t{:.12}", h.epoch, h.train_loss, h.valid_loss)?;
    }
    Ok(())
}

pub fn train_ensemble(args: TrainEnsembleArgs) -> Result<()> {
    let corpus = load_jsonl(&args.corpus, args.directed)?;
    let splits = split_corpus(&corpus, &args.splits, args.seed)?;
    let selection = match &args.starts {
        Some(s) => MemberSelection::Starts(
            s.split(',').map(|n| EntityType::new(n.trim())).collect(),
        ),
        None => MemberSelection::TopK,
    };
    let config = EnsembleConfig { k: args.k, selection, theta: 0.5 };
    let members = ensemble::train_ensemble(
        &splits,
        &config,
        &model_config(&args.model),
        &train_config(&args.optim, false),
        args.seed,
    )?;

    std::fs::create_dir_all(&args.out_dir)?;
    for member in &members {
        let tag = member.start_node().unwrap_or("unordered");
        let path = args.out_dir.join(format!("model.{tag}.ckpt"));
        member.save(&path)?;
        println!(
            "member {tag}: {} epochs, valid loss {:.6} -> {}",
            member.metadata.epochs_run,
            member.metadata.best_valid_loss,
            path.display()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct SampleRow {
    sample: usize,
    edges_f1: f64,
    nodes_f1: f64,
    degree_jsd: f64,
    eigenvector_jsd: f64,
}

#[derive(Serialize)]
struct Report {
    mode: String,
    model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    instance: Option<relgraph::eval::InstanceMetrics>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    samples: Vec<SampleRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean: Option<SampleRow>,
}

fn model_label(checkpoints: &[Checkpoint], theta: f64) -> String {
    if checkpoints.len() == 1 {
        match checkpoints[0].start_node() {
            Some(s) => format!("BFS_{s}"),
            None => "unordered".to_string(),
        }
    } else {
        format!("WOC k={} theta={theta}", checkpoints.len())
    }
}

fn consensus_prediction(
    checkpoints: &[Checkpoint],
    instance: &dataset::Instance,
    theta: f64,
    dump: &mut Vec<PredictionSet>,
) -> Result<BTreeSet<relgraph::relation::RelationEdge>> {
    let members: Vec<PredictionSet> = checkpoints
        .iter()
        .enumerate()
        .map(|(i, ck)| {
            Ok(PredictionSet {
                instance_id: instance.id.clone(),
                member: ck.start_node().map(str::to_string).unwrap_or_else(|| format!("m{i}")),
                relations: ck.predict_instance(instance)?.relations,
            })
        })
        .collect::<Result<_>>()?;
    let consensus = woc_consensus(&members, theta)?;
    dump.extend(members);
    Ok(consensus)
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let checkpoints: Vec<Checkpoint> =
        args.checkpoint.iter().map(|p| Checkpoint::load(p)).collect::<Result<_>>()?;
    let directed = checkpoints[0].directed;
    let token_set: BTreeSet<&str> =
        checkpoints[0].ordering.tokens().iter().map(String::as_str).collect();
    for ck in &checkpoints[1..] {
        let other: BTreeSet<&str> = ck.ordering.tokens().iter().map(String::as_str).collect();
        if other != token_set || ck.directed != directed {
            return Err(Error::VocabMismatch(
                "ensemble checkpoints cover different relation languages".into(),
            ));
        }
    }

    let corpus = load_jsonl(&args.corpus, directed)?;
    let eval_instances: Vec<dataset::Instance> = if args.full_corpus {
        corpus.instances.clone()
    } else {
        split_corpus(&corpus, &args.splits, args.seed)?.test.instances
    };
    if eval_instances.is_empty() {
        return Err(Error::invalid("no instances to evaluate"));
    }
    for inst in &eval_instances {
        for r in &inst.relations {
            let tok = r.token()?;
            if !token_set.contains(tok.as_str()) {
                return Err(Error::VocabMismatch(format!(
                    "corpus relation {tok:?} missing from checkpoint vocabulary"
                )));
            }
        }
    }

    let label = model_label(&checkpoints, args.theta);
    let mut dump: Vec<PredictionSet> = Vec::new();
    let report = match args.mode.as_str() {
        "instance" => {
            let mut predictions = Vec::with_capacity(eval_instances.len());
            let mut gold = Vec::with_capacity(eval_instances.len());
            for inst in &eval_instances {
                let pred =
                    consensus_prediction(&checkpoints, inst, args.theta, &mut dump)?;
                predictions.push((inst.id.clone(), pred));
                gold.push((inst.id.clone(), inst.relation_set()));
            }
            let metrics = instance_metrics(&predictions, &gold)?;
            println!("model        {label}");
            println!("accuracy     {:.4}", metrics.accuracy);
            println!("precision    {:.4}", metrics.precision);
            println!("recall       {:.4}", metrics.recall);
            println!("f1           {:.4}", metrics.f1);
            Report {
                mode: "instance".into(),
                model: label,
                instance: Some(metrics),
                samples: vec![],
                mean: None,
            }
        }
        "metagraph" => {
            let eval_corpus = Corpus {
                instances: eval_instances,
                config: corpus.config,
                provenance: corpus.provenance.clone(),
            };
            let mut rng = SeedStreams::new(args.seed).stream("subdomain");
            let mut rows = Vec::with_capacity(args.samples);
            println!("model {label}");
            println!("sample  edges_f1  nodes_f1  degree_jsd  eigen_jsd");
            for s in 0..args.samples {
                let sample =
                    sample_subdomain_with_rng(&eval_corpus, args.sample_size, &mut rng)?;
                let mut predicted_sets = Vec::with_capacity(sample.instances.len());
                for inst in &sample.instances {
                    predicted_sets
                        .push(consensus_prediction(&checkpoints, inst, args.theta, &mut dump)?);
                }
                let predicted = aggregate_metagraph(predicted_sets.iter());
                let m = evaluate_metagraph(&predicted, &sample.metagraph)?;
                println!(
                    "{s:>6}  {:>8.4}  {:>8.4}  {:>10.4}  {:>9.4}",
                    m.edges_f1, m.nodes_f1, m.degree_jsd, m.eigenvector_jsd
                );
                rows.push(SampleRow {
                    sample: s,
                    edges_f1: m.edges_f1,
                    nodes_f1: m.nodes_f1,
                    degree_jsd: m.degree_jsd,
                    eigenvector_jsd: m.eigenvector_jsd,
                });
            }
            let n = rows.len() as f64;
            let mean = SampleRow {
                sample: rows.len(),
                edges_f1: rows.iter().map(|r| r.edges_f1).sum::<f64>() / n,
                nodes_f1: rows.iter().map(|r| r.nodes_f1).sum::<f64>() / n,
                degree_jsd: rows.iter().map(|r| r.degree_jsd).sum::<f64>() / n,
                eigenvector_jsd: rows.iter().map(|r| r.eigenvector_jsd).sum::<f64>() / n,
            };
            println!(
                "  mean  {:>8.4}  {:>8.4}  {:>10.4}  {:>9.4}",
                mean.edges_f1, mean.nodes_f1, mean.degree_jsd, mean.eigenvector_jsd
            );
            Report {
                mode: "metagraph".into(),
                model: label,
                instance: None,
                samples: rows,
                mean: Some(mean),
            }
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown mode {other:?} (expected instance or metagraph)"
            )))
        }
    };

    if let Some(path) = &args.dump_predictions {
        ensemble::save_predictions(&dump, path)?;
    }
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::invalid(e.to_string()))?;
        std::fs::write(path, json)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

pub fn extract(args: ExtractArgs) -> Result<()> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let corpus = load_jsonl(&args.corpus, checkpoint.directed)?;

    let missing: Vec<&str> = corpus
        .instances
        .iter()
        .filter(|i| i.dep_edges.is_empty() || i.noun_chunks.is_empty())
        .map(|i| i.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "instances missing dependency/noun-chunk annotations: {}",
            missing.join(", ")
        )));
    }

    let stop_words: BTreeSet<String> = match &args.stop_words {
        Some(p) => std::fs::read_to_string(p)?
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect(),
        None => BTreeSet::new(),
    };

    let config = if args.select_head {
        let labeled: Vec<dataset::Instance> = corpus
            .instances
            .iter()
            .filter(|i| !i.triplets.is_empty())
            .cloned()
            .collect();
        let (config, accuracy) = select_best_head(&checkpoint, &labeled, &stop_words)?;
        println!(
            "selected layer {} head {} (pair accuracy {:.4})",
            config.layer, config.head, accuracy
        );
        config
    } else {
        ExtractionConfig { layer: args.layer, head: args.head, stop_words }
    };

    let mut out = std::fs::File::create(&args.out)?;
    let mut kg = Metagraph::new();
    let mut relation_union = Metagraph::new();
    let mut extracted = 0usize;
    for inst in &corpus.instances {
        if inst.noun_chunks.len() < 2 {
            log::warn!("instance {:?} skipped: fewer than 2 noun chunks", inst.id);
            continue;
        }
        let result = extract_instance(&checkpoint, inst, &config)?;
        for warning in &result.skipped {
            log::warn!("{warning}");
        }
        for r in &result.relations {
            relation_union.insert_edge(r.clone());
        }
        for t in &result.triplets {
            serde_json::to_writer(&mut out, t).map_err(|e| Error::invalid(e.to_string()))?;
            out.write_all(b"\n")?;
            extracted += 1;
            kg.insert_edge(relgraph::relation::RelationEdge::new(
                t.subject_text.clone(),
                t.relation.clone(),
                t.object_text.clone(),
                checkpoint.directed,
            ));
        }
    }
    println!("extracted {extracted} triplets -> {}", args.out.display());

    if let Some(path) = &args.dot {
        std::fs::write(path, kg.to_dot("knowledge_graph"))?;
        println!("knowledge graph -> {}", path.display());
    }
    if let Some(path) = &args.metagraph {
        std::fs::write(path, relation_union.to_text()?)?;
        println!("metagraph -> {}", path.display());
    }
    Ok(())
}
