//! Batch command-line interface: corpus synthesis and conversion, model
//! training (single and ensemble), evaluation, and attention-based triplet
//! extraction.
//!
//! Exit codes: 0 on success, 1 when a computation fails (divergence,
//! non-convergence, sampling exhaustion), 2 for usage and input errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "relgraph", version, about = "Infer a corpus's domain metagraph")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus over a random connected metagraph.
    Synth(SynthArgs),
    /// Normalize a raw corpus: derive relation types, filter rare ones.
    Convert(ConvertArgs),
    /// Train a single transformer.
    Train(TrainArgs),
    /// Train an ensemble of transformers under different orderings.
    TrainEnsemble(TrainEnsembleArgs),
    /// Score checkpoints at instance or metagraph level.
    Evaluate(EvaluateArgs),
    /// Extract entity-pair triplets from decoder attention.
    Extract(ExtractArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    edges: usize,
    #[arg(long)]
    instances: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Treat relations as directed (default: undirected, canonicalized).
    #[arg(long)]
    directed: bool,
    /// JSON map of entity surface strings to entity types, for triplet
    /// conversion.
    #[arg(long)]
    type_map: Option<PathBuf>,
    /// JSON map of relation tokens to keyword lists; switches annotation to
    /// the co-occurrence + dependency-path rule.
    #[arg(long)]
    keywords: Option<PathBuf>,
    /// Drop or rewrite relation tokens occurring fewer than this many times.
    #[arg(long)]
    min_count: Option<usize>,
    /// JSON map of rare tokens to their replacements.
    #[arg(long)]
    replace_map: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ModelFlags {
    #[arg(long, default_value_t = 300)]
    embed_dim: usize,
    #[arg(long, default_value_t = 10)]
    heads: usize,
    #[arg(long, default_value_t = 2)]
    enc_layers: usize,
    #[arg(long, default_value_t = 2)]
    dec_layers: usize,
    #[arg(long, default_value_t = 512)]
    ffn_dim: usize,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
}

#[derive(Args, Clone)]
struct OptimFlags {
    #[arg(long, default_value_t = 0.0005)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
}

#[derive(Args, Clone)]
struct SplitFlags {
    /// Train/valid/test fractions.
    #[arg(long, default_value = "0.8,0.1,0.1", value_parser = commands::parse_fractions)]
    split: (f64, f64, f64),
    #[arg(long, default_value_t = 0)]
    run_index: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Target ordering: bfs, unordered, or shuffled (per-epoch baseline).
    #[arg(long, default_value = "bfs")]
    ordering: String,
    /// BFS start node (default: lexicographically smallest entity type).
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    directed: bool,
    /// Plain-text word vectors to overwrite matching source embeddings.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Per-epoch loss log (default: <out>.log).
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    optim: OptimFlags,
    #[command(flatten)]
    splits: SplitFlags,
}

#[derive(Args)]
struct TrainEnsembleArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    k: usize,
    /// Comma-separated start nodes; omitted means top-k by validation
    /// accuracy over all orderings.
    #[arg(long)]
    starts: Option<String>,
    #[arg(long)]
    directed: bool,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    optim: OptimFlags,
    #[command(flatten)]
    splits: SplitFlags,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Checkpoint file; repeat for an ensemble.
    #[arg(long, required = true)]
    checkpoint: Vec<PathBuf>,
    /// instance or metagraph.
    #[arg(long, default_value = "instance")]
    mode: String,
    /// Consensus threshold for ensembles.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Number of subdomain samples (metagraph mode).
    #[arg(long, default_value_t = 10)]
    samples: usize,
    /// Instances per subdomain sample (metagraph mode).
    #[arg(long, default_value_t = 10)]
    sample_size: usize,
    /// Score the whole corpus instead of the derived test split.
    #[arg(long)]
    full_corpus: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dump per-member prediction sets as JSONL.
    #[arg(long)]
    dump_predictions: Option<PathBuf>,
    #[command(flatten)]
    splits: SplitFlags,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 0)]
    layer: usize,
    #[arg(long, default_value_t = 0)]
    head: usize,
    /// Grid-search the best (layer, head) on instances with gold triplets.
    #[arg(long)]
    select_head: bool,
    /// One stop-word per line.
    #[arg(long)]
    stop_words: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Aggregated entity-level knowledge graph in DOT form.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Aggregated metagraph edge list.
    #[arg(long)]
    metagraph: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match commands::expand_config_args(std::env::args().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let result = match cli.command {
        Command::Synth(args) => commands::synth(args),
        Command::Convert(args) => commands::convert(args),
        Command::Train(args) => commands::train(args),
        Command::TrainEnsemble(args) => commands::train_ensemble(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Extract(args) => commands::extract(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
