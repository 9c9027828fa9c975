use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use goalrec_core::evaluator::{OracleRanker, PopularityRanker, RandomRanker};
use goalrec_core::semantic::import_vectors;
use goalrec_core::synthetic::write_synthetic;
use goalrec_core::{
    evaluate, fit, load_checkpoint, load_corpus, save_checkpoint, split_corpus, train as train_model, Corpus,
    CorpusFormat, EvalConfig, EvalReport, ExpansionMode, Hyperparams, Mashup, PvdmConfig, Ranker, SyntheticConfig,
};
use goalrec_server::api::RecommendRequest;
use goalrec_server::{handle_recommend, AppState};
use log::info;
use serde::{Deserialize, Serialize};

use crate::{EvalArgs, Format, RecommendArgs, Scorer, ServeArgs, SyntheticArgs, TrainArgs};

/// Train / test mashup ids written next to a checkpoint.
#[derive(Debug, Serialize, Deserialize)]
struct SplitFile {
    seed: u64,
    train_fraction: f64,
    train: Vec<String>,
    test: Vec<String>,
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn load(corpus: &Path) -> Result<Corpus> {
    load_corpus(corpus, CorpusFormat::JsonLines).with_context(|| format!("loading corpus {}", corpus.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn train(args: TrainArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let report_path = args.report.unwrap_or_else(|| sibling(&args.checkpoint, ".report.jsonl"));
    let split_path = args.split.unwrap_or_else(|| sibling(&args.checkpoint, ".split.json"));
    let corpus = load(&args.corpus)?;

    let pvdm = PvdmConfig {
        window: args.pvdm.pvdm_window,
        epochs: args.pvdm.pvdm_epochs,
        inner_negatives: args.pvdm.pvdm_negatives,
        min_token_count: args.pvdm.pvdm_min_count,
        infer_steps: args.pvdm.infer_steps,
        seed,
        ..PvdmConfig::default()
    };
    pvdm.validate()?;
    let imported = match &args.import_vectors {
        Some(path) => Some(import_vectors(path, &corpus).with_context(|| format!("importing {}", path.display()))?),
        None => None,
    };
    let dim = match (&imported, args.d) {
        (Some(space), Some(d)) if d != space.dim() => {
            bail!("--d {d} disagrees with the {}-dimensional vector file", space.dim())
        }
        (Some(space), _) => space.dim(),
        (None, d) => d.unwrap_or(100),
    };
    let hp = Hyperparams {
        dim,
        learning_rate: args.eta,
        negative_ratio: args.negative_ratio,
        max_epochs: args.epochs,
        convergence_epsilon: args.epsilon,
        init_scale: args.init_scale,
        seed,
        attention_enabled: !args.no_attention,
        expansion: if args.incremental {
            ExpansionMode::Incremental
        } else {
            ExpansionMode::LeaveOneOut
        },
    };
    hp.validate()?;
    println!(
        "d={} eta={} r={:.2} epochs={} epsilon={} attention={} expansion={:?} seed={}",
        hp.dim, hp.learning_rate, hp.negative_ratio, hp.max_epochs, hp.convergence_epsilon, hp.attention_enabled, hp.expansion, seed
    );

    let (train_set, test_set) = split_corpus(&corpus, args.train_fraction, seed)?;
    let ids = |ms: &[Mashup]| ms.iter().map(|m| m.id.clone()).collect();
    let split = SplitFile {
        seed,
        train_fraction: args.train_fraction,
        train: ids(&train_set),
        test: ids(&test_set),
    };
    info!("{} training / {} test mashups", split.train.len(), split.test.len());

    let (params, report) = match imported {
        Some(space) => train_model(&train_set, Arc::new(space), &hp)?,
        None => fit(&corpus, &train_set, &pvdm, &hp)?,
    };
    let hash = save_checkpoint(&args.checkpoint, &params)?;
    write(&report_path, report.to_jsonl())?;
    write(&split_path, serde_json::to_string_pretty(&split)? + "\n")?;

    let objectives = report.objectives();
    println!(
        "epochs={} converged={} L_first={:.6} L_last={:.6}",
        objectives.len(),
        report.converged,
        objectives.first().copied().unwrap_or(f64::NAN),
        objectives.last().copied().unwrap_or(f64::NAN)
    );
    println!("checkpoint {} sha256={hash}", args.checkpoint.display());
    println!("report {}", report_path.display());
    println!("split {}", split_path.display());
    Ok(())
}

fn read_split(path: &Path, corpus: &Corpus) -> Result<(Vec<Mashup>, Vec<Mashup>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading split {}", path.display()))?;
    let split: SplitFile = serde_json::from_str(&text).with_context(|| format!("parsing split {}", path.display()))?;
    let resolve = |ids: &[String]| -> Result<Vec<Mashup>> {
        ids.iter()
            .map(|id| {
                corpus
                    .mashup(id)
                    .cloned()
                    .with_context(|| format!("split names mashup `{id}` which the corpus lacks"))
            })
            .collect()
    };
    Ok((resolve(&split.train)?, resolve(&split.test)?))
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let corpus = load(&args.corpus)?;
    let split_path = args.split.clone().unwrap_or_else(|| sibling(&args.checkpoint, ".split.json"));
    let (train_set, test_set) = read_split(&split_path, &corpus)?;
    let config = EvalConfig {
        k_values: args.k.clone(),
        temporal_filter: !args.no_temporal_filter,
        stepwise: args.stepwise.is_some(),
        seed,
    };
    config.validate()?;

    let (label, report) = match args.scorer {
        Scorer::Model => {
            let ckpt = load_checkpoint(&args.checkpoint)?;
            let model = ckpt.params;
            if !model.semantic().service_ids().iter().map(String::as_str).eq(corpus.service_ids()) {
                bail!("checkpoint and corpus list different services");
            }
            let label = if model.attention_enabled() { "goalrec" } else { "goalrec-uniform" };
            (label, run(&model, &corpus, &test_set, &config)?)
        }
        Scorer::Popularity => {
            let ranker = PopularityRanker::fit(corpus.num_services(), &train_set);
            ("popularity", run(&ranker, &corpus, &test_set, &config)?)
        }
        Scorer::Random => ("random", run(&RandomRanker { seed }, &corpus, &test_set, &config)?),
        Scorer::Oracle => ("oracle", run(&OracleRanker, &corpus, &test_set, &config)?),
    };

    match args.format {
        Format::Table => {
            println!("{}", report.table_header());
            println!("{}", report.table_row(label));
        }
        Format::Json => print!("{}", report.to_jsonl(label)),
    }
    if let (Some(dir), Some(curves)) = (&args.stepwise, &report.stepwise) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for curve in curves {
            let path = dir.join(format!("stepwise_size{}.csv", curve.size));
            write(&path, curve.to_csv())?;
            eprintln!("wrote {} ({} mashups)", path.display(), curve.mashups);
        }
    }
    Ok(())
}

fn run<R: Ranker>(ranker: &R, corpus: &Corpus, test: &[Mashup], config: &EvalConfig) -> Result<EvalReport> {
    let report = evaluate(ranker, corpus, test, config)?;
    if report.skipped > 0 {
        eprintln!("skipped {} instances", report.skipped);
    }
    Ok(report)
}

pub fn recommend(args: RecommendArgs) -> Result<()> {
    let state = AppState::load(&args.checkpoint, &args.corpus)?;
    let req = RecommendRequest {
        goal_text: args.goal,
        selected_service_ids: args.selected,
        k: args.k,
    };
    let resp = handle_recommend(&state, &req).map_err(|e| anyhow::anyhow!("{}: {}", e.code, e.message))?;
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&resp)?),
        Format::Table => {
            println!("{:>4}  {:<24} {:<32} {:>10}", "rank", "service", "name", "p");
            for item in &resp.items {
                println!("{:>4}  {:<24} {:<32} {:>10.6}", item.rank, item.service_id, item.name, item.probability);
            }
            if !resp.attention.is_empty() {
                println!();
                println!("attention");
                for a in &resp.attention {
                    println!("  {:<24} {:.4}", a.service_id, a.weight);
                }
            }
        }
    }
    Ok(())
}

pub fn serve(args: ServeArgs) -> Result<()> {
    let state = AppState::load(&args.checkpoint, &args.corpus)?;
    eprintln!("checkpoint sha256={}", state.checkpoint_hash());
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime.block_on(goalrec_server::serve(state, args.bind))?;
    Ok(())
}

pub fn make_synthetic(args: SyntheticArgs) -> Result<()> {
    let config = SyntheticConfig {
        services: args.services,
        groups: args.groups,
        mashups: args.mashups,
        per_mashup: args.per_mashup,
        seed: resolve_seed(args.seed),
        groups_per_domain: args.groups_per_domain,
        noise_services: args.noise_services,
        vocab_per_group: args.vocab_per_group,
        words_per_service: args.words_per_service,
        goal_words_per_group: args.goal_words,
        dated: args.dated,
    };
    write_synthetic(&args.out, &config)?;
    println!(
        "wrote {} services, {} mashups to {}",
        config.services + config.noise_services,
        config.mashups,
        args.out.display()
    );
    Ok(())
}
