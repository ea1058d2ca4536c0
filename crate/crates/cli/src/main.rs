use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use hyperrag::config::{self, AppConfig};
use hyperrag::construction::{self, ConstructionError, CorpusSpec};
use hyperrag::descriptors::{parse_lambdas, DescriptorError, Lambda};
use hyperrag::eval::{self, EvalError};
use hyperrag::model::{EntityKind, KnowledgeBase};
use hyperrag::providers::{ProviderError, Providers, ResponseCache};
use hyperrag::retrieval::{
    lambdas_for_criteria, parse_criteria, Engine, Mode, Query, RetrievalError,
};
use hyperrag::{store, synthetic};

#[derive(Parser)]
#[command(name = "hyperrag", version, about = "Multimodal hypergraph retrieval-augmented generation")]
struct Cli {
    /// Config file (default: ./hyperrag.json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a knowledge base from a corpus.
    Build(BuildArgs),
    /// Answer one question against a knowledge base.
    Query(QueryArgs),
    /// Score answers against golden answers.
    Eval(EvalArgs),
    /// Print knowledge base statistics.
    Inspect(InspectArgs),
    /// Write the synthetic demo corpus.
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Extractors to run, e.g. 1,2,3,4.
    #[arg(long, value_parser = parse_lambdas)]
    lambdas: Option<BTreeSet<Lambda>>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    text: String,
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    mode: Option<Mode>,
    /// Image criteria, e.g. i,ii,iii,iv,v.
    #[arg(long, value_parser = parse_criteria)]
    criteria: Option<BTreeSet<hyperrag::retrieval::Criterion>>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    cases: PathBuf,
    #[arg(long)]
    mode: Option<Mode>,
    /// Run the extractor-subset by k grid.
    #[arg(long)]
    ablate: bool,
    /// Comma-separated k values.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    kb: PathBuf,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long)]
    out: PathBuf,
}

fn load_config(explicit: Option<&Path>) -> Result<AppConfig> {
    let path = config::discover(explicit)?;
    Ok(AppConfig::load(&path)?)
}

/// Providers with the response cache of `kb_dir` preloaded.
fn providers_for(cfg: &AppConfig, kb_dir: &Path) -> Result<(Providers, PathBuf)> {
    let cache_path = cfg.cache_path(kb_dir);
    let cache = ResponseCache::load(&cache_path)
        .with_context(|| format!("reading cache {}", cache_path.display()))?;
    Ok((cfg.providers()?.with_cache(cache), cache_path))
}

fn load_kb(dir: &Path) -> Result<KnowledgeBase> {
    store::load(dir).with_context(|| format!("loading knowledge base {}", dir.display()))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_build(cfg: &AppConfig, args: &BuildArgs) -> Result<()> {
    let mut spec = CorpusSpec::load(&args.corpus, &cfg.construction)?;
    if let Some(l) = &args.lambdas {
        spec.enabled_lambdas = l.clone();
    }
    let (providers, cache_path) = providers_for(cfg, &args.out)?;
    let (kb, report) = construction::build_knowledge(&spec, &providers, &cfg.prompts()?)?;
    construction::write_build(&kb, &report, &args.out)?;
    providers
        .cache()
        .save(&cache_path)
        .with_context(|| format!("writing cache {}", cache_path.display()))?;
    log::info!(
        "built {} entities and {} hyperedges into {}",
        kb.entities().len(),
        kb.hyperedges().len(),
        args.out.display()
    );
    print_json(&report)
}

fn cmd_query(cfg: &AppConfig, args: &QueryArgs) -> Result<()> {
    let kb = load_kb(&args.kb)?;
    let (providers, _) = providers_for(cfg, &args.kb)?;
    let prompts = cfg.prompts()?;
    let mut query = Query::new(args.text.clone());
    query.k = args.k.unwrap_or(cfg.retrieval.k);
    query.mode = args.mode.unwrap_or(cfg.retrieval.mode);
    query.criteria = args
        .criteria
        .clone()
        .unwrap_or_else(|| cfg.retrieval.criteria.clone());
    if let Some(p) = &args.image {
        query.image = Some(fs::read(p).with_context(|| format!("reading {}", p.display()))?);
    }
    let engine = Engine::new(&kb, &providers, &prompts).with_word_budget(cfg.retrieval.word_budget);
    let answer = engine.answer(&query)?;
    print_json(&answer)
}

fn cmd_eval(cfg: &AppConfig, args: &EvalArgs) -> Result<()> {
    let kb = load_kb(&args.kb)?;
    let cases = eval::load_cases(&args.cases)?;
    let (providers, _) = providers_for(cfg, &args.kb)?;
    let prompts = cfg.prompts()?;
    let engine = Engine::new(&kb, &providers, &prompts).with_word_budget(cfg.retrieval.word_budget);
    let mode = args.mode.unwrap_or(cfg.retrieval.mode);
    if args.k.contains(&0) {
        bail!("--k values must be at least 1");
    }
    let output = if args.ablate {
        let ks = if args.k.is_empty() {
            eval::DEFAULT_ABLATION_K.to_vec()
        } else {
            args.k.clone()
        };
        let cells = eval::run_ablation(&engine, &cases, mode, &eval::default_subsets(), &ks)?;
        json!({ "cells": cells })
    } else {
        let k = args.k.first().copied().unwrap_or(cfg.retrieval.k);
        let lambdas: BTreeSet<Lambda> = lambdas_for_criteria(&cfg.retrieval.criteria)
            .intersection(&kb.meta.enabled_lambdas)
            .copied()
            .collect();
        serde_json::to_value(eval::run_eval(&engine, &cases, mode, &lambdas, k)?)?
    };
    if let Some(out) = &args.out {
        let mut bytes = serde_json::to_vec_pretty(&output)?;
        bytes.push(b'\n');
        fs::write(out, bytes).with_context(|| format!("writing {}", out.display()))?;
    }
    print_json(&output)
}

fn cmd_inspect(args: &InspectArgs) -> Result<()> {
    let kb = load_kb(&args.kb)?;
    let counts = kb.entity_counts();
    let entities: BTreeMap<&str, usize> = [EntityKind::Text, EntityKind::Image, EntityKind::Descriptor]
        .into_iter()
        .map(|k| (k.as_str(), counts.get(&k).copied().unwrap_or(0)))
        .collect();
    let coverage: BTreeMap<String, usize> = Lambda::ALL
        .into_iter()
        .map(|l| {
            let n = kb.images().values().filter(|i| i.descriptors.has(l)).count();
            (l.to_string(), n)
        })
        .collect();
    let vectors: BTreeMap<&String, usize> = kb.indexes().iter().map(|(k, v)| (k, v.len())).collect();
    print_json(&json!({
        "entities": entities,
        "hyperedges": kb.hyperedges().len(),
        "chunks": kb.chunks().len(),
        "images": kb.images().len(),
        "enabled_lambdas": kb.meta.enabled_lambdas,
        "lambda_coverage": coverage,
        "vectors": vectors,
        "dimension": kb.meta.dimension,
        "image_dimension": kb.meta.image_dimension,
    }))
}

fn cmd_fixture(args: &FixtureArgs) -> Result<()> {
    synthetic::write_fixture(&args.out)
        .with_context(|| format!("writing fixture to {}", args.out.display()))?;
    print_json(&json!({ "written": args.out }))
}

fn is_provider_failure(err: &anyhow::Error) -> bool {
    fn retrieval(e: &RetrievalError) -> bool {
        matches!(
            e,
            RetrievalError::Provider(_) | RetrievalError::Descriptor(DescriptorError::Provider(_))
        )
    }
    err.chain().any(|e| {
        e.is::<ProviderError>()
            || matches!(e.downcast_ref(), Some(ConstructionError::Provider(_)))
            || e.downcast_ref().is_some_and(retrieval)
            || match e.downcast_ref::<EvalError>() {
                Some(EvalError::Provider(_)) => true,
                Some(EvalError::Retrieval(r)) => retrieval(r),
                _ => false,
            }
            || matches!(e.downcast_ref(), Some(config::ConfigError::Provider(_)))
    })
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Build(a) => cmd_build(&load_config(config)?, a),
        Command::Query(a) => cmd_query(&load_config(config)?, a),
        Command::Eval(a) => cmd_eval(&load_config(config)?, a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Fixture(a) => cmd_fixture(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_provider_failure(&e) { 2 } else { 1 })
        }
    }
}
