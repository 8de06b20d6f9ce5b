//! Subcommand definitions and their implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kbc_core::eval_harness::{
    read_dataset, run_benchmark, sample_dataset, write_dataset, BenchmarkConfig, EvalQuery, Method,
};
use kbc_core::path_fusion::{write_weights, WeightSet};
use kbc_core::rule_catalog::rules_for;
use kbc_core::weight_learning::{collect_training_examples, frequency_weights, learn_importance, LrHyperparameters};
use serde_json::json;

use crate::app::{Artifacts, CompletionRequest};
use crate::config::{AppConfig, Overrides};
use crate::service::{self, ServiceState};

fn unit_interval(raw: &str) -> Result<f64, String> {
    let v: f64 = raw.parse().map_err(|_| format!("{raw:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must be in [0, 1], got {v}"))
    }
}

fn positive(raw: &str) -> Result<usize, String> {
    match raw.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("must be a positive integer, got {raw:?}")),
    }
}

fn method(raw: &str) -> Result<Method, String> {
    raw.parse()
}

#[derive(Debug, Parser)]
#[command(name = "kbc", version, about = "Query-driven knowledge base completion")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "KBC_CONFIG")]
    pub config: Option<PathBuf>,
    /// Fact file (subject, relation, object per line).
    #[arg(long, global = true, env = "KBC_KB")]
    pub kb: Option<PathBuf>,
    /// Rule file (head, body, confidence, support per line).
    #[arg(long, global = true, env = "KBC_RULES")]
    pub rules: Option<PathBuf>,
    /// QA provider: a fixture file, an http(s) base URL, or `none`.
    #[arg(long, global = true, env = "KBC_PROVIDER_SOURCE")]
    pub provider: Option<String>,
    #[arg(long, global = true, env = "KBC_FREQUENCY_WEIGHTS")]
    pub frequency_weights: Option<PathBuf>,
    #[arg(long, global = true, env = "KBC_IMPORTANCE_WEIGHTS")]
    pub importance_weights: Option<PathBuf>,
    /// Ensemble calibration written by `train-weights --mode ensemble`.
    #[arg(long, global = true, env = "KBC_ENSEMBLE_MODEL")]
    pub ensemble_model: Option<PathBuf>,
    /// Confidence threshold for first-step intermediates.
    #[arg(long, global = true, value_parser = unit_interval)]
    pub t: Option<f64>,
    /// Intermediates kept per path type.
    #[arg(long, global = true, value_parser = positive)]
    pub k: Option<usize>,
    #[arg(long, global = true, value_parser = positive)]
    pub parallelism: Option<usize>,
    /// Provider calls allowed per query.
    #[arg(long, global = true, value_parser = positive)]
    pub budget: Option<usize>,
    /// Delay injected before each provider call.
    #[arg(long, global = true, hide = true)]
    pub delay_ms: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank answers for one query and print them as JSON.
    Query(QueryArgs),
    /// Learn path weights (or ensemble calibration) from a training set.
    TrainWeights(TrainArgs),
    /// Evaluate methods on a test set and write a JSON report.
    Evaluate(EvaluateArgs),
    /// Sample train and test query files from the KB.
    Sample(SampleArgs),
    /// Serve completions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub subject: String,
    #[arg(long)]
    pub relation: String,
    #[arg(long, value_parser = method)]
    pub method: Option<Method>,
    /// Weight file for the selected path fusion method.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainMode {
    Frequency,
    Importance,
    Ensemble,
}

#[derive(Debug, Args)]
pub struct LrArgs {
    #[arg(long, default_value_t = LrHyperparameters::default().l2)]
    pub l2: f64,
    #[arg(long, default_value_t = LrHyperparameters::default().step_size)]
    pub step_size: f64,
    #[arg(long, default_value_t = LrHyperparameters::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = LrHyperparameters::default().tolerance)]
    pub tolerance: f64,
}

impl LrArgs {
    fn hyperparameters(&self, seed: u64) -> LrHyperparameters {
        LrHyperparameters { l2: self.l2, step_size: self.step_size, epochs: self.epochs, tolerance: self.tolerance, seed }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub mode: TrainMode,
    /// Training queries (subject, relation, comma-separated objects).
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write a JSON training summary.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub lr: LrArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated methods; all of them by default.
    #[arg(long, value_delimiter = ',', value_parser = method)]
    pub methods: Vec<Method>,
    /// Include wall-clock timings (makes the report non-reproducible).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub lr: LrArgs,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long = "relation", required = true)]
    pub relations: Vec<String>,
    #[arg(long, default_value_t = kbc_core::eval_harness::DEFAULT_N_TRAIN)]
    pub n_train: usize,
    #[arg(long, default_value_t = kbc_core::eval_harness::DEFAULT_N_TEST)]
    pub n_test: usize,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "KBC_PORT")]
    pub port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        let mut o = Overrides {
            kb: self.kb.clone(),
            rules: self.rules.clone(),
            provider: self.provider.clone(),
            frequency_weights: self.frequency_weights.clone(),
            importance_weights: self.importance_weights.clone(),
            ensemble_model: self.ensemble_model.clone(),
            t: self.t,
            k: self.k,
            parallelism: self.parallelism,
            budget: self.budget,
            delay_ms: self.delay_ms,
            seed: self.seed,
            ..Overrides::default()
        };
        match &self.command {
            Command::Query(q) => {
                o.method = q.method;
                if let Some(w) = &q.weights {
                    match q.method {
                        Some(Method::MpfFrequency) => o.frequency_weights = Some(w.clone()),
                        _ => o.importance_weights = Some(w.clone()),
                    }
                }
            }
            Command::Serve(s) => o.port = s.port,
            _ => {}
        }
        o
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read_queries(path: &Path) -> Result<Vec<EvalQuery>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_dataset(BufReader::new(file)).with_context(|| format!("reading dataset {}", path.display()))
}

fn relations_of(queries: &[EvalQuery]) -> Vec<String> {
    queries.iter().map(|q| q.relation.clone()).collect::<BTreeSet<_>>().into_iter().collect()
}

pub fn run(cli: Cli) -> Result<()> {
    let config = AppConfig::resolve(cli.config.as_deref(), &cli.overrides())?;
    match &cli.command {
        Command::Query(args) => query(&config, args),
        Command::TrainWeights(args) => train(&config, args),
        Command::Evaluate(args) => evaluate(&config, args),
        Command::Sample(args) => sample(&config, args),
        Command::Serve(args) => serve(&config, args),
    }
}

fn query(config: &AppConfig, args: &QueryArgs) -> Result<()> {
    let artifacts = Artifacts::load(config)?;
    let request = CompletionRequest {
        subject: args.subject.clone(),
        relation: args.relation.clone(),
        method: config.method,
        t: None,
        k: None,
    };
    let response = artifacts.complete(&request, config.query)?;
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &response)?;
    writeln!(out)?;
    Ok(())
}

fn train(config: &AppConfig, args: &TrainArgs) -> Result<()> {
    let artifacts = Artifacts::load_inputs(config)?;
    let train = read_queries(&args.train)?;
    let hp = args.lr.hyperparameters(config.seed);
    let mut summary = BTreeMap::new();
    if args.mode == TrainMode::Ensemble {
        let ranker = artifacts.ranker(config.query);
        let mut calibration = BTreeMap::new();
        for relation in relations_of(&train) {
            let cal = ranker.calibrate(&relation, &train, hp)?;
            summary.insert(relation.clone(), json!({ "lambda": cal.lambda, "model_trained": cal.lr_model.is_some() }));
            calibration.insert(relation, cal);
        }
        write_file(&args.out, &(serde_json::to_string_pretty(&calibration)? + "\n"))?;
    } else {
        let mut set = WeightSet::new();
        for relation in relations_of(&train) {
            let queries: Vec<EvalQuery> = train.iter().filter(|q| q.relation == relation).cloned().collect();
            let rules = rules_for(&artifacts.rules, &relation);
            let examples =
                collect_training_examples(&queries, &rules, &artifacts.store, artifacts.provider.as_ref(), &config.query);
            let positives = examples.iter().filter(|e| e.label).count();
            let mut entry = json!({
                "queries": queries.len(),
                "examples": examples.len(),
                "positives": positives,
                "negatives": examples.len() - positives,
            });
            let table = if args.mode == TrainMode::Frequency {
                frequency_weights(&relation, &examples)
            } else {
                let (table, report) =
                    learn_importance(&relation, &examples, hp).with_context(|| format!("training weights for {relation}"))?;
                entry["training"] = serde_json::to_value(&report)?;
                table
            };
            entry["path_types"] = json!(table.weights.len());
            summary.insert(relation.clone(), entry);
            set.insert(relation, table);
        }
        write_file(&args.out, &write_weights(&set))?;
    }
    if let Some(path) = &args.report {
        write_file(path, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    }
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn evaluate(config: &AppConfig, args: &EvaluateArgs) -> Result<()> {
    let artifacts = Artifacts::load(config)?;
    let train = read_queries(&args.train)?;
    let test = read_queries(&args.test)?;
    if test.is_empty() {
        bail!("test set {} is empty", args.test.display());
    }
    let methods = if args.methods.is_empty() { Method::ALL.to_vec() } else { args.methods.clone() };
    let bench = BenchmarkConfig {
        relations: relations_of(&test),
        methods,
        query: config.query,
        lr: args.lr.hyperparameters(config.seed),
        include_timing: args.timing,
    };
    let mut ranker = artifacts.ranker(config.query);
    let report = run_benchmark(&bench, &mut ranker, &train, &test)?;
    write_file(&args.out, &report.to_json())?;
    for cell in &report.cells {
        eprintln!("{}\t{}\tMAP {:.4}", cell.relation, cell.method, cell.map);
    }
    Ok(())
}

fn sample(config: &AppConfig, args: &SampleArgs) -> Result<()> {
    let file = File::open(&config.kb).with_context(|| format!("opening {}", config.kb.display()))?;
    let store = kbc_core::kb_store::FactStore::load_triples(BufReader::new(file))?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for relation in &args.relations {
        let (tr, te) = sample_dataset(&store, relation, args.n_train, args.n_test, config.seed)?;
        train.extend(tr);
        test.extend(te);
    }
    write_file(&args.train_out, &write_dataset(&train))?;
    write_file(&args.test_out, &write_dataset(&test))?;
    eprintln!("sampled {} train and {} test queries", train.len(), test.len());
    Ok(())
}

fn serve(config: &AppConfig, args: &ServeArgs) -> Result<()> {
    let artifacts = Artifacts::load(config)?;
    let state = Arc::new(ServiceState { artifacts, query: config.query, default_method: config.method });
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), config.port))
            .await
            .with_context(|| format!("binding {}:{}", args.host, config.port))?;
        let addr = listener.local_addr()?;
        // tests and scripts read this line to find the port
        println!("listening on http://{addr}");
        std::io::stdout().flush()?;
        service::serve(listener, state).await?;
        Ok(())
    })
}
