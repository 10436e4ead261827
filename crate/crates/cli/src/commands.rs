//! Subcommand implementations. Each reads its inputs, writes its artifacts and returns the
//! config hash it logged.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use delayprop_core::cases::{CaseTable, IngestOptions};
use delayprop_core::data::{parse_records, write_records, GdpGateRule};
use delayprop_core::eval::{blanket_sq_error, evaluate, ll_comparison, weight_sweep, BlanketError, LlComparison, NodeEval, SweepReport};
use delayprop_core::inference::{posterior, EvidenceSet, StateRef};
use delayprop_core::json::to_canonical;
use delayprop_core::network::{fit_priors, Case};
use delayprop_core::regression::FitConfig;
use delayprop_core::synth::{default_scenario_json, generate, sweep_scenario_json, GroundTruth};
use delayprop_core::{ModelDocument, Network, NetworkSpec, PosteriorSet};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::plot::{histogram, line_chart, Series};
use crate::{config_hash, CliError};

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "delayprop", version, about = "Flight-delay propagation with discrete Bayesian networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive per-leg case variables from flight-leg records.
    Ingest(IngestArgs),
    /// Fit regression priors for every binned node of a network config.
    Fit(FitArgs),
    /// Build prior tables and update them with cases.
    Train(TrainArgs),
    /// Score a trained model on cases, or sweep case weights with --weights.
    Eval(EvalArgs),
    /// Sweep the case weight and score train and test cases at each value.
    Sweep(SweepArgs),
    /// Posterior marginals given evidence.
    Query(QueryArgs),
    /// Generate flight-leg records from a ground-truth scenario.
    Simulate(SimulateArgs),
    /// Serve models over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Flight-leg CSV.
    #[arg(long)]
    pub records: PathBuf,
    /// Case CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub origin: Option<String>,
    #[arg(long)]
    pub dest: Option<String>,
    /// A GDP flight counts as held at the gate when its GDP time is below this many minutes.
    #[arg(long, default_value_t = 0.0)]
    pub gdp_threshold: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Network config JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Case CSV.
    #[arg(long)]
    pub cases: PathBuf,
    /// Config JSON with fitted priors.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0.01)]
    pub min_improvement: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma_floor: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Network config JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Case CSV.
    #[arg(long)]
    pub cases: PathBuf,
    /// Model JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Case weight; defaults to the config's `case_weight`.
    #[arg(long)]
    pub weight: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Cases to score (the test sample in sweep mode).
    #[arg(long)]
    pub cases: PathBuf,
    /// Trained model JSON.
    #[arg(long, required_unless_present = "weights")]
    pub model: Option<PathBuf>,
    /// Comma-separated case weights; switches to sweep mode.
    #[arg(long, value_delimiter = ',', requires_all = ["config", "train"])]
    pub weights: Option<Vec<f64>>,
    /// Network config JSON (sweep mode).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training cases (sweep mode).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Report to write: JSON, or the sweep CSV in sweep mode.
    #[arg(long)]
    pub out: PathBuf,
    /// Confusion matrices as long-format CSV.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
    /// Compare log-likelihoods of the cases with this many model-generated cases.
    #[arg(long)]
    pub ll_samples: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// SVG chart: log-likelihood histograms, or sweep curves in sweep mode.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Sweep report JSON with baselines (sweep mode).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    pub counts_weight: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,3,10,30,100,300")]
    pub weights: Vec<f64>,
    /// Sweep CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Full report JSON, including the regression-only and counts-only baselines.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Case weight of the counts-only baseline.
    #[arg(long, default_value_t = 30.0)]
    pub counts_weight: f64,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Evidence JSON, e.g. '{"gate_in_dest":["[15,30)"]}'.
    #[arg(long, conflicts_with = "evidence_file")]
    pub evidence: Option<String>,
    #[arg(long)]
    pub evidence_file: Option<PathBuf>,
    /// Comma-separated nodes to report; all nodes by default.
    #[arg(long, value_delimiter = ',')]
    pub nodes: Vec<String>,
    /// Write the posterior JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `default`, `sweep`, or a scenario JSON path.
    #[arg(long, default_value = "default")]
    pub scenario: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Flight-leg CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// True state labels per case as CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// The scenario's network config, ready for `fit` or `train`.
    #[arg(long)]
    pub config_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "DELAYPROP_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Directory of model JSON files loaded at startup; uploaded models are stored here.
    #[arg(long, env = "DELAYPROP_MODEL_DIR")]
    pub model_dir: Option<PathBuf>,
}

pub fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn log_hash(bytes: &[u8]) -> String {
    let hash = config_hash(bytes);
    info!("config hash {hash}");
    hash
}

fn parse_json<T: for<'de> Deserialize<'de>>(bytes: &[u8], what: &Path) -> CliResult<T> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Data(format!("{}: {e}", what.display())))
}

fn canonical<S: Serialize>(value: &S) -> CliResult<String> {
    let mut s = to_canonical(value)?;
    s.push('\n');
    Ok(s)
}

fn read_cases(path: &Path) -> CliResult<CaseTable> {
    let bytes = read_input(path)?;
    CaseTable::read_csv(bytes.as_slice()).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> CliResult<(Network, String)> {
    let bytes = read_input(path)?;
    let hash = log_hash(&bytes);
    let doc: ModelDocument = parse_json(&bytes, path)?;
    Ok((Network::from_document(doc)?, hash))
}

fn discretize(net: &Network, table: &CaseTable) -> CliResult<Vec<Case>> {
    let (cases, report) = net.discretize(table)?;
    for (i, &n) in report.unmapped.iter().enumerate() {
        if n > 0 {
            warn!("{n} values of `{}` fell outside its states", net.name(i));
        }
    }
    Ok(cases)
}

pub fn ingest(args: &IngestArgs) -> CliResult<String> {
    let opts = IngestOptions {
        origin: args.origin.clone(),
        dest: args.dest.clone(),
        gdp_gate: GdpGateRule { threshold_min: args.gdp_threshold },
    };
    let hash = log_hash(
        format!("ingest origin={:?} dest={:?} gdp_threshold={}", opts.origin, opts.dest, args.gdp_threshold).as_bytes(),
    );
    let bytes = read_input(&args.records)?;
    let parsed = parse_records(bytes.as_slice())?;
    for e in &parsed.errors {
        warn!("line {}: {}", e.line, e.message);
    }
    let table = CaseTable::from_records(&parsed.records, &opts)?;
    info!("{} records read, {} skipped, {} cases written", parsed.records.len(), parsed.skipped(), table.len());
    let mut out = Vec::new();
    table.write_csv(&mut out)?;
    write_output(&args.out, out)?;
    Ok(hash)
}

pub fn fit(args: &FitArgs) -> CliResult<String> {
    let bytes = read_input(&args.config)?;
    let hash = log_hash(&bytes);
    let spec: NetworkSpec = parse_json(&bytes, &args.config)?;
    let table = read_cases(&args.cases)?;
    let cfg = FitConfig {
        folds: args.folds,
        min_improvement: args.min_improvement,
        sigma_floor: args.sigma_floor,
        ..FitConfig::default()
    };
    let fitted = fit_priors(&spec, &table, &cfg)?;
    Network::build(fitted.clone())?;
    write_output(&args.out, canonical(&fitted)?)?;
    Ok(hash)
}

pub fn train(args: &TrainArgs) -> CliResult<String> {
    let bytes = read_input(&args.config)?;
    let hash = log_hash(&bytes);
    let mut spec: NetworkSpec = parse_json(&bytes, &args.config)?;
    if let Some(w) = args.weight {
        spec.case_weight = w;
    }
    let weight = spec.case_weight;
    let table = read_cases(&args.cases)?;
    let prior = Network::build(spec)?;
    let cases = discretize(&prior, &table)?;
    let (net, report) = prior.learn(&cases, weight)?;
    for i in 0..net.len() {
        info!("{}: {} cases used, {} skipped", net.name(i), report.used[i], report.skipped[i]);
    }
    write_output(&args.out, canonical(&net.to_document())?)?;
    Ok(hash)
}

#[derive(Debug, Serialize)]
struct EvalReport {
    nodes: Vec<NodeEval<f64>>,
    blanket: Vec<BlanketError<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_likelihood: Option<LlSummary>,
}

#[derive(Debug, Serialize)]
struct LlSummary {
    ks_statistic: f64,
    holdout: usize,
    generated: usize,
    holdout_neg_inf: usize,
    generated_neg_inf: usize,
}

pub fn eval(args: &EvalArgs) -> CliResult<String> {
    if let Some(weights) = &args.weights {
        let sweep = SweepArgs {
            config: args.config.clone().expect("clap enforces --config"),
            train: args.train.clone().expect("clap enforces --train"),
            test: args.cases.clone(),
            weights: weights.clone(),
            out: args.out.clone(),
            report: args.report.clone(),
            plot: args.plot.clone(),
            counts_weight: args.counts_weight,
        };
        return run_sweep(&sweep);
    }
    let (net, hash) = load_model(args.model.as_deref().expect("clap enforces --model"))?;
    let cases = discretize(&net, &read_cases(&args.cases)?)?;
    let nodes = evaluate(&net, &cases, &net.binned_nodes())?;
    let blanket = blanket_sq_error(&net, &cases);
    let mut ll = None;
    if let Some(n) = args.ll_samples {
        let complete: Vec<Vec<usize>> = cases.iter().filter_map(|c| c.iter().copied().collect()).collect();
        let cmp: LlComparison<f64> = ll_comparison(&net, &complete, n, args.seed)?;
        if let Some(path) = &args.plot {
            let svg = histogram(
                "Log-likelihood of cases",
                "log-likelihood",
                &[("observed", &cmp.holdout), ("generated", &cmp.generated)],
                30,
            );
            write_output(path, svg)?;
        }
        ll = Some(LlSummary {
            ks_statistic: cmp.ks_statistic,
            holdout: cmp.holdout.len(),
            generated: cmp.generated.len(),
            holdout_neg_inf: cmp.holdout_neg_inf,
            generated_neg_inf: cmp.generated_neg_inf,
        });
    }
    if let Some(path) = &args.confusion {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Data(e.to_string());
        w.write_record(["node", "actual", "predicted", "count"]).map_err(io)?;
        for e in &nodes {
            let labels = net.node(net.index_of(&e.node)?).domain.labels();
            for (a, row) in e.confusion.iter().enumerate() {
                for (p, &count) in row.iter().enumerate() {
                    w.write_record([e.node.as_str(), &labels[a], &labels[p], &count.to_string()]).map_err(io)?;
                }
            }
        }
        write_output(path, w.into_inner().map_err(|e| CliError::Data(e.to_string()))?)?;
    }
    write_output(&args.out, canonical(&EvalReport { nodes, blanket, log_likelihood: ll })?)?;
    Ok(hash)
}

pub fn sweep(args: &SweepArgs) -> CliResult<String> {
    run_sweep(args)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| delayprop_core::json::round_sig(v).to_string()).unwrap_or_default()
}

fn run_sweep(args: &SweepArgs) -> CliResult<String> {
    let bytes = read_input(&args.config)?;
    let hash = log_hash(&bytes);
    let spec: NetworkSpec = parse_json(&bytes, &args.config)?;
    let prior = Network::build(spec.clone())?;
    let train = discretize(&prior, &read_cases(&args.train)?)?;
    let test = discretize(&prior, &read_cases(&args.test)?)?;
    let report: SweepReport<f64> = weight_sweep(&spec, &train, &test, &args.weights, args.counts_weight)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(["node", "weight", "train_mse", "test_mse", "train_scaled", "test_scaled"]).map_err(io)?;
    for r in &report.rows {
        w.write_record([
            r.node.clone(),
            r.weight.to_string(),
            fmt_opt(Some(r.train_mse)),
            fmt_opt(Some(r.test_mse)),
            fmt_opt(r.train_scaled),
            fmt_opt(r.test_scaled),
        ])
        .map_err(io)?;
    }
    write_output(&args.out, w.into_inner().map_err(|e| CliError::Data(e.to_string()))?)?;
    if let Some(path) = &args.report {
        write_output(path, canonical(&report)?)?;
    }
    if let Some(path) = &args.plot {
        let series = [
            Series { name: "train".into(), points: report.totals.iter().map(|t| (t.0, t.1)).collect() },
            Series { name: "test".into(), points: report.totals.iter().map(|t| (t.0, t.2)).collect() },
        ];
        write_output(path, line_chart("Approximate MSE by case weight", "case weight", "summed MSE", &series, true))?;
    }
    Ok(hash)
}

/// Body shared by the CLI and the HTTP query endpoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryBody {
    #[serde(default)]
    pub evidence: BTreeMap<String, Vec<StateRef>>,
    /// Nodes to report; all when empty.
    #[serde(default)]
    pub query: Vec<String>,
}

pub fn answer(net: &Network, body: &QueryBody) -> delayprop_core::Result<PosteriorSet> {
    let evidence = EvidenceSet::from_refs(net, &body.evidence)?;
    let query = body
        .query
        .iter()
        .map(|n| net.index_of(n).map_err(|_| delayprop_core::Error::InvalidEvidence(format!("unknown query node `{n}`"))))
        .collect::<delayprop_core::Result<Vec<_>>>()?;
    posterior(net, &evidence, &query)
}

pub fn query(args: &QueryArgs) -> CliResult<String> {
    let (net, hash) = load_model(&args.model)?;
    let evidence = match (&args.evidence, &args.evidence_file) {
        (Some(text), _) => serde_json::from_str(text).map_err(|e| CliError::Data(format!("evidence: {e}")))?,
        (None, Some(path)) => parse_json(&read_input(path)?, path)?,
        (None, None) => BTreeMap::new(),
    };
    let body = QueryBody { evidence, query: args.nodes.clone() };
    let result = answer(&net, &body)?;
    let text = canonical(&result)?;
    match &args.out {
        Some(path) => write_output(path, text)?,
        None => print!("{text}"),
    }
    Ok(hash)
}

pub fn scenario_text(name: &str) -> CliResult<String> {
    match name {
        "default" => Ok(default_scenario_json().to_string()),
        "sweep" => Ok(sweep_scenario_json().to_string()),
        path => fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {path}: {e}"))),
    }
}

pub fn simulate(args: &SimulateArgs) -> CliResult<String> {
    let text = scenario_text(&args.scenario)?;
    let hash = log_hash(text.as_bytes());
    let gt = GroundTruth::<f64>::from_json(&text)?;
    let out = generate(&gt, args.n, args.seed)?;
    let mut buf = Vec::new();
    write_records(&mut buf, &out.records)?;
    write_output(&args.out, buf)?;
    if let Some(path) = &args.truth {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Data(e.to_string());
        let net = &gt.truth;
        w.write_record((0..net.len()).map(|i| net.name(i))).map_err(io)?;
        let labels: Vec<Vec<String>> = (0..net.len()).map(|i| net.node(i).domain.labels()).collect();
        for case in &out.cases {
            w.write_record(case.iter().enumerate().map(|(i, &s)| labels[i][s].as_str())).map_err(io)?;
        }
        write_output(path, w.into_inner().map_err(|e| CliError::Data(e.to_string()))?)?;
    }
    if let Some(path) = &args.config_out {
        write_output(path, canonical(&gt.spec)?)?;
    }
    info!("{} cases, {} records", args.n, out.records.len());
    Ok(hash)
}
