//! `goalrec`: train, evaluate, query and serve goal-driven service
//! recommenders, and generate synthetic corpora.

mod commands;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "goalrec", version, about = "Goal-driven next-service recommendation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the semantic space and the context model on a corpus.
    Train(TrainArgs),
    /// Score a checkpoint (or a baseline) on the held-out split.
    Eval(EvalArgs),
    /// Print top-K suggestions for one composition context.
    Recommend(RecommendArgs),
    /// Serve the /v1 HTTP API.
    Serve(ServeArgs),
    /// Write a planted-structure corpus.
    MakeSynthetic(SyntheticArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Directory holding services.jsonl and mashups.jsonl.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "model.ckpt")]
    checkpoint: PathBuf,
    /// Training report (JSON lines). Defaults to `<checkpoint>.report.jsonl`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Split file recording train / test mashup ids. Defaults to `<checkpoint>.split.json`.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Embedding dimension. Taken from the vector file with --import-vectors.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 0.001)]
    eta: f64,
    #[arg(long, default_value_t = 0.2)]
    negative_ratio: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    init_scale: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Uniform weights instead of learned attention (ablation arm).
    #[arg(long)]
    no_attention: bool,
    /// Train on incrementally built contexts instead of leave-one-out.
    #[arg(long)]
    incremental: bool,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Use pre-trained vectors instead of training PV-DM.
    #[arg(long)]
    import_vectors: Option<PathBuf>,
    #[command(flatten)]
    pvdm: PvdmArgs,
}

#[derive(Debug, Args)]
struct PvdmArgs {
    #[arg(long, default_value_t = 5)]
    pvdm_window: usize,
    #[arg(long, default_value_t = 40)]
    pvdm_epochs: usize,
    #[arg(long, default_value_t = 5)]
    pvdm_negatives: usize,
    #[arg(long, default_value_t = 1)]
    pvdm_min_count: usize,
    /// Gradient steps when inferring vectors for unseen goal text.
    #[arg(long, default_value_t = 50)]
    infer_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scorer {
    Model,
    Popularity,
    Random,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, default_value = "model.ckpt")]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Defaults to `<checkpoint>.split.json`.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "3,5,10,20")]
    k: Vec<usize>,
    /// Rank all services, not only those published before the mashup.
    #[arg(long)]
    no_temporal_filter: bool,
    /// Also run the stepwise protocol and write one CSV per group size here.
    #[arg(long, value_name = "DIR")]
    stepwise: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[arg(long, value_enum, default_value_t = Scorer::Model)]
    scorer: Scorer,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct RecommendArgs {
    #[arg(long, default_value = "model.ckpt")]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "")]
    goal: String,
    /// Comma-separated service ids already in the composition.
    #[arg(long, value_delimiter = ',')]
    selected: Vec<String>,
    #[arg(long, default_value_t = 10)]
    k: i64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "model.ckpt")]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
}

#[derive(Debug, Args)]
struct SyntheticArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 60)]
    services: usize,
    #[arg(long, default_value_t = 12)]
    groups: usize,
    #[arg(long, default_value_t = 300)]
    mashups: usize,
    #[arg(long, default_value_t = 3)]
    per_mashup: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Groups whose goals share one domain vocabulary.
    #[arg(long, default_value_t = 1)]
    groups_per_domain: usize,
    /// Generic services inserted once into every mashup.
    #[arg(long, default_value_t = 0)]
    noise_services: usize,
    #[arg(long, default_value_t = 8)]
    vocab_per_group: usize,
    #[arg(long, default_value_t = 4)]
    words_per_service: usize,
    #[arg(long, default_value_t = 4)]
    goal_words: usize,
    /// Attach publication and submission dates.
    #[arg(long)]
    dated: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Recommend(a) => commands::recommend(a),
        Command::Serve(a) => commands::serve(a),
        Command::MakeSynthetic(a) => commands::make_synthetic(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
