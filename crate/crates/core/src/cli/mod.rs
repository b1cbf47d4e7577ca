//! Command-line interface.

mod bench;
mod output;

pub use bench::{bench_traverse, BenchReport, BenchRow};
pub use output::{format_embeddings, parse_embeddings, RunManifest};

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::estimators::{audit_estimator, audit_unbiasedness, audit_variance, estimate_tk, fanout_one_endpoint_test};
use crate::evaluation::{evaluate_link_prediction, make_split};
use crate::graph_store::{
    build_compact_adj, generate_graph, load_edge_list, read_snapshot, storage_fit, toy_graph, write_snapshot,
    CompactAdj, GraphKind, LoadOptions, NodeId, SNAPSHOT_MAGIC,
};
use crate::learning::{
    audit_deepwalk_gradient, audit_factorization_gradient, ensemble_equivalence_check, init_model, train_embeddings,
    EnsembleConfig, GradientAuditConfig, LossScale, Method, Schedule, TrainConfig, TrainOutput,
};
use crate::rng::RngStream;
use crate::specializations::{audit_message_passing, Contrastive, MessagePassingAuditConfig};
use output::{format_edges, format_losses, format_q_trace, Run};

#[derive(Debug, Parser)]
#[command(name = "gttf", version, about = "Stochastic graph traversal toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic edge list.
    GenGraph(GenGraphArgs),
    /// Estimate k-step transition probabilities from one traversal.
    EstimateTk(EstimateArgs),
    /// Train node embeddings.
    Train {
        #[command(subcommand)]
        method: TrainCommand,
    },
    /// Hold out edges, train on the rest, and score the held-out links.
    EvalLinkpred(EvalArgs),
    /// Time traversals across graph sizes.
    BenchTraverse(BenchArgs),
    /// Run statistical audits.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GraphArgs {
    /// Edge list (`src<TAB>dst`) or binary snapshot.
    #[arg(long)]
    pub graph: PathBuf,
    /// Remap arbitrary node names to dense ids in first-seen order.
    #[arg(long)]
    pub map_ids: bool,
    /// Keep edges one-way instead of symmetrizing.
    #[arg(long)]
    pub directed: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenGraphArgs {
    #[arg(long, value_enum)]
    pub kind: GraphKind,
    #[arg(long)]
    pub n: usize,
    /// Edge probability or degree, depending on the kind.
    #[arg(long, default_value_t = 0.0)]
    pub param: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write a binary snapshot.
    #[arg(long)]
    pub snapshot: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub fanout: usize,
    /// Seed nodes; defaults to every node on graphs of at most 1000 nodes.
    #[arg(long, value_delimiter = ',')]
    pub batch: Option<Vec<NodeId>>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Repeat the estimate and audit its mean and variance.
    #[arg(long)]
    pub audit: bool,
    #[arg(long, default_value_t = 10_000)]
    pub runs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainOptions {
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    #[arg(long, default_value_t = 3)]
    pub fanout: usize,
    /// Walk depth for DeepWalk and node2vec; WYS walks `window` steps.
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    /// Negatives drawn per round.
    #[arg(long, default_value_t = 10)]
    pub negatives: usize,
    #[arg(long, value_enum, default_value_t = Contrastive::NegativeSampling)]
    pub objective: Contrastive,
    #[arg(long, value_enum, default_value_t = LossScale::PerSeed)]
    pub loss_scale: LossScale,
    /// Training rounds.
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.2)]
    pub lr_decay: f64,
    #[arg(long, default_value_t = 50)]
    pub lr_interval: usize,
    /// Nodes per round; defaults to all nodes.
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

impl TrainOptions {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size.unwrap_or(usize::MAX),
            fanouts: vec![self.fanout; self.depth],
            window: self.window,
            negatives: self.negatives,
            schedule: Schedule { initial: self.lr, factor: self.lr_decay, interval: self.lr_interval },
            rounds: self.epochs,
            objective: self.objective,
            loss_scale: self.loss_scale,
            workers: self.workers,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub options: TrainOptions,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Node2VecArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Return parameter.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// In-out parameter.
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
}

#[derive(Debug, Subcommand)]
pub enum TrainCommand {
    Deepwalk(TrainArgs),
    Node2vec(Node2VecArgs),
    Wys(TrainArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Deepwalk,
    Node2vec,
    Wys,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Fraction of edges held out.
    #[arg(long, default_value_t = 0.2)]
    pub fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub negatives_per_edge: usize,
    #[arg(long, default_value_t = 1)]
    pub split_seed: u64,
    /// Score these embeddings instead of training.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodName::Deepwalk)]
    pub method: MethodName,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[command(flatten)]
    pub options: TrainOptions,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1_000, 100_000])]
    pub sizes: Vec<usize>,
    /// Seeds per traversal.
    #[arg(long, default_value_t = 64)]
    pub b: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [3, 3])]
    pub fanouts: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    /// Average degree of the generated graphs.
    #[arg(long, default_value_t = 10.0)]
    pub degree: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Prop {
    /// Mean of the transition estimate.
    #[value(name = "1")]
    Unbiasedness,
    /// Variance of the transition estimate.
    #[value(name = "2")]
    Variance,
    /// DeepWalk gradient against its exact decomposition.
    #[value(name = "3")]
    DeepwalkGradient,
    /// Factorization gradient against exact powers.
    #[value(name = "4")]
    FactorizationGradient,
    /// Mean renormalized rooted adjacency.
    #[value(name = "5")]
    MessagePassing,
    /// Adjacency storage against a linear model in n and m.
    #[value(name = "6")]
    Storage,
    /// Linear GCN ensemble equivalence.
    #[value(name = "8")]
    Ensemble,
    /// Single-walker endpoint distribution.
    #[value(name = "fanout-one")]
    FanoutOne,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CheckArgs {
    /// Audits to run; all when omitted.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub prop: Vec<Prop>,
    #[arg(long)]
    pub all: bool,
    /// Graph for audits 1, 2, 5 and fanout-one; the five-node example by default.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Fanout; per-audit defaults are 3, except 2 for audit 5 and 1 for audit 8.
    #[arg(long)]
    pub fanout: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub runs: usize,
    /// Walkers for the fanout-one audit.
    #[arg(long, default_value_t = 100_000)]
    pub walkers: usize,
    /// Seed node for the fanout-one audit.
    #[arg(long, default_value_t = 1)]
    pub source: NodeId,
    #[arg(long, default_value_t = 3)]
    pub alpha: usize,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    /// Seeds for the ensemble audit, starting at `seed`.
    #[arg(long, default_value_t = 5)]
    pub ensemble_seeds: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Whether the command's audits, if any, passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    AuditFailure,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Success
        } else {
            Outcome::AuditFailure
        }
    }
}

pub struct LoadedGraph {
    pub adj: CompactAdj,
    pub names: Option<Vec<String>>,
    pub undirected_edges: Vec<(NodeId, NodeId)>,
}

pub fn load_graph(args: &GraphArgs) -> Result<LoadedGraph> {
    let path = &args.graph;
    let mut magic = [0u8; 5];
    let is_snapshot = File::open(path)
        .with_context(|| format!("cannot open graph {}", path.display()))?
        .read_exact(&mut magic)
        .is_ok()
        && &magic == SNAPSHOT_MAGIC;
    if is_snapshot {
        let file = File::open(path).with_context(|| format!("cannot open graph {}", path.display()))?;
        let adj = read_snapshot(BufReader::new(file)).with_context(|| format!("cannot read snapshot {}", path.display()))?;
        let undirected_edges = adj.undirected_edges();
        return Ok(LoadedGraph { adj, names: None, undirected_edges });
    }
    let opts = LoadOptions { map_ids: args.map_ids, directed: args.directed, ..Default::default() };
    let el = load_edge_list(path, opts)?;
    let (adj, _) = build_compact_adj(&el, !args.directed)?;
    let undirected_edges = el.edges.iter().filter(|e| e.src != e.dst).map(|e| (e.src, e.dst)).collect();
    Ok(LoadedGraph { adj, names: el.id_map, undirected_edges })
}

fn format_names(names: &[String]) -> String {
    let mut out = String::new();
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(out, "{i}\t{name}");
    }
    out
}

fn resolve_method(name: MethodName, p: f64, q: f64) -> Method {
    match name {
        MethodName::Deepwalk => Method::DeepWalk,
        MethodName::Node2vec => Method::Node2Vec { p, q },
        MethodName::Wys => Method::Wys,
    }
}

/// Initialize from substream 0 of `seed`, then train from substream 1.
pub fn train_with(adj: &CompactAdj, method: &Method, options: &TrainOptions) -> Result<TrainOutput> {
    let rng = RngStream::new(options.seed);
    let model = init_model(adj.n(), options.dim, method, options.window, &rng.substream(0))?;
    Ok(train_embeddings(adj, model, method, &options.config(), &rng.substream(1))?)
}

fn write_training(run: &mut Run, out: &TrainOutput) -> Result<()> {
    run.write("embeddings.txt", &format_embeddings(&out.model.embeddings()))?;
    run.write("loss.csv", &format_losses(&out.losses))?;
    if !out.q_trace.is_empty() {
        run.write("q.csv", &format_q_trace(&out.q_trace))?;
    }
    Ok(())
}

fn cmd_gen_graph(args: &GenGraphArgs) -> Result<Outcome> {
    let mut run = Run::new("gen-graph", args, args.seed, Some(args.out.clone()))?;
    let g = run.phase("generate", || generate_graph(args.kind, args.n, args.param, args.seed))?;
    let pairs: Vec<(NodeId, NodeId)> = g.edges.edges.iter().map(|e| (e.src, e.dst)).collect();
    run.write("graph.tsv", &format_edges(&pairs))?;
    let adj = build_compact_adj(&g.edges, true)?.0;
    if args.snapshot {
        let mut bytes = Vec::new();
        write_snapshot(&adj, &mut bytes)?;
        let path = args.out.join("graph.gttf");
        std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
    }
    run.set_graph(&adj);
    run.note("components", g.components);
    println!("n={}\nedges={}\ncomponents={}", args.n, pairs.len(), g.components);
    run.finish()?;
    Ok(Outcome::Success)
}

fn default_batch(adj: &CompactAdj, batch: &Option<Vec<NodeId>>) -> Result<Vec<NodeId>> {
    match batch {
        Some(b) => Ok(b.clone()),
        None if adj.n() <= 1000 => Ok((0..adj.n()).collect()),
        None => bail!("graph has {} nodes; pass --batch explicitly above 1000", adj.n()),
    }
}

fn cmd_estimate_tk(args: &EstimateArgs) -> Result<Outcome> {
    let mut run = Run::new("estimate-tk", args, args.seed, args.out.clone())?;
    let g = run.phase("load", || load_graph(&args.graph))?;
    run.set_graph(&g.adj);
    let batch = default_batch(&g.adj, &args.batch)?;
    let rng = RngStream::new(args.seed);
    let est = run.phase("estimate", || estimate_tk(&g.adj, &batch, args.k, args.fanout, &rng, args.workers))?;
    run.write("tk.tsv", &est.to_tsv())?;
    let mut outcome = Outcome::Success;
    if args.audit {
        let (mean, var) = run.phase("audit", || {
            audit_estimator(&g.adj, &batch, args.k, args.fanout, args.runs, &rng.substream(1), args.workers)
        })?;
        let report = format!("{}\n{}", mean.to_kv(), var.to_kv());
        print!("{report}");
        run.write("audit.txt", &report)?;
        run.write("unbiasedness.tsv", &mean.entries_tsv())?;
        run.write("variance.tsv", &var.entries_tsv())?;
        outcome = Outcome::from_pass(mean.pass && var.pass);
    } else if args.out.is_none() {
        print!("{}", est.to_tsv());
    }
    run.finish()?;
    Ok(outcome)
}

fn cmd_train(name: &str, args: &TrainArgs, method: Method, flags: &impl Serialize) -> Result<Outcome> {
    let mut run = Run::new(name, flags, args.options.seed, args.out.clone())?;
    let g = run.phase("load", || load_graph(&args.graph))?;
    run.set_graph(&g.adj);
    if let Some(names) = &g.names {
        run.write("ids.tsv", &format_names(names))?;
    }
    let out = run.phase("train", || train_with(&g.adj, &method, &args.options))?;
    write_training(&mut run, &out)?;
    if let Some(last) = out.losses.last() {
        println!("rounds={}\nfinal_loss={last}", out.losses.len());
    }
    run.finish()?;
    Ok(Outcome::Success)
}

fn cmd_eval_linkpred(args: &EvalArgs) -> Result<Outcome> {
    let mut run = Run::new("eval-linkpred", args, args.options.seed, args.out.clone())?;
    let g = run.phase("load", || load_graph(&args.graph))?;
    run.set_graph(&g.adj);
    let split = run.phase("split", || {
        make_split(g.adj.n(), &g.undirected_edges, args.fraction, args.negatives_per_edge, args.split_seed)
    })?;
    run.note("fraction", args.fraction);
    run.note("n_train", split.train.len());
    run.note("train_disconnects", split.disconnects());
    if split.disconnects() {
        eprintln!(
            "note: holding out edges raised the component count from {} to {}",
            split.full_components, split.train_components
        );
    }
    run.write("train.tsv", &format_edges(&split.train))?;
    run.write("test.tsv", &format_edges(&split.test))?;
    run.write("negatives.tsv", &format_edges(&split.negatives))?;
    let z = match &args.embeddings {
        Some(path) => parse_embeddings(path)?,
        None => {
            let train_adj = split.train_adjacency()?;
            let method = resolve_method(args.method, args.p, args.q);
            let out = run.phase("train", || train_with(&train_adj, &method, &args.options))?;
            write_training(&mut run, &out)?;
            out.model.embeddings()
        }
    };
    let metrics = run.phase("evaluate", || evaluate_link_prediction(&z, &split))?;
    print!("{}", metrics.to_kv());
    run.write("metrics.txt", &metrics.to_kv())?;
    run.finish()?;
    Ok(Outcome::Success)
}

fn cmd_bench(args: &BenchArgs) -> Result<Outcome> {
    let mut run = Run::new("bench-traverse", args, args.seed, args.out.clone())?;
    let report = run.phase("bench", || {
        bench_traverse(&args.sizes, args.b, &args.fanouts, args.repeats, args.degree, args.seed, args.workers)
    })?;
    print!("{}{}", report.to_tsv(), report.to_kv());
    run.write("bench.tsv", &report.to_tsv())?;
    run.write("report.txt", &report.to_kv())?;
    run.finish()?;
    Ok(Outcome::from_pass(report.pass != Some(false)))
}

fn check_graph(path: &Option<PathBuf>) -> Result<CompactAdj> {
    match path {
        Some(p) => Ok(load_graph(&GraphArgs { graph: p.clone(), map_ids: false, directed: false })?.adj),
        None => Ok(build_compact_adj(&toy_graph(), true)?.0),
    }
}

/// 20-node `G(n, 0.3)` used by the gradient audits.
pub fn gradient_audit_graph(seed: u64) -> Result<CompactAdj> {
    let g = generate_graph(GraphKind::ErdosRenyi, 20, 0.3, seed)?;
    Ok(build_compact_adj(&g.edges, true)?.0)
}

/// Run the selected audits, append one section per audit to `report`, and
/// return whether all passed.
pub fn run_checks(args: &CheckArgs, report: &mut String) -> Result<bool> {
    let mut props = if args.prop.is_empty() || args.all {
        Prop::value_variants().to_vec()
    } else {
        args.prop.clone()
    };
    props.sort();
    props.dedup();
    let rng = RngStream::new(args.seed);
    let mut all_pass = true;
    let mut section = |text: String, pass: bool, report: &mut String| {
        report.push_str(&text);
        report.push('\n');
        all_pass &= pass;
    };
    let has = |p: Prop| props.contains(&p);
    let f = |default: usize| args.fanout.unwrap_or(default);

    if has(Prop::Unbiasedness) || has(Prop::Variance) {
        let adj = check_graph(&args.graph)?;
        let batch: Vec<NodeId> = (0..adj.n()).collect();
        let stream = rng.substream(1);
        match (has(Prop::Unbiasedness), has(Prop::Variance)) {
            (true, true) => {
                let (m, v) = audit_estimator(&adj, &batch, args.k, f(3), args.runs, &stream, args.workers)?;
                section(m.to_kv(), m.pass, report);
                section(v.to_kv(), v.pass, report);
            }
            (true, false) => {
                let m = audit_unbiasedness(&adj, &batch, args.k, f(3), args.runs, &stream, args.workers)?;
                section(m.to_kv(), m.pass, report);
            }
            _ => {
                let v = audit_variance(&adj, &batch, args.k, f(3), args.runs, &stream, args.workers)?;
                section(v.to_kv(), v.pass, report);
            }
        }
    }
    if has(Prop::DeepwalkGradient) || has(Prop::FactorizationGradient) {
        let adj = gradient_audit_graph(args.seed)?;
        let config = GradientAuditConfig {
            fanouts: vec![f(3); 2],
            runs: args.runs,
            workers: args.workers,
            ..Default::default()
        };
        if has(Prop::DeepwalkGradient) {
            let r = audit_deepwalk_gradient(&adj, &config, &rng.substream(3))?;
            section(r.to_kv(), r.pass, report);
        }
        if has(Prop::FactorizationGradient) {
            let r = audit_factorization_gradient(&adj, &config, &rng.substream(4))?;
            section(r.to_kv(), r.pass, report);
        }
    }
    if has(Prop::MessagePassing) {
        let adj = check_graph(&args.graph)?;
        let r = audit_message_passing(&adj, MessagePassingAuditConfig::unbiased(f(2), args.runs), &rng.substream(5))?;
        section(r.to_kv(), r.pass, report);
    }
    if has(Prop::Storage) {
        let r = storage_fit(&[1_000, 3_000, 10_000, 30_000], &[2.0, 5.0, 10.0, 20.0], args.seed)?;
        section(r.to_kv(), r.pass, report);
    }
    if has(Prop::Ensemble) {
        let fanout = f(1);
        let mut pass = true;
        let mut worst = 0.0f64;
        for s in 0..args.ensemble_seeds {
            let r = ensemble_equivalence_check(EnsembleConfig::new(args.alpha, args.n, fanout, args.seed + s))?;
            worst = worst.max(r.ratio);
            pass &= r.pass;
            section(r.to_kv(), r.pass, report);
        }
        section(
            format!("audit=ensemble_summary\nseeds={}\nworst_ratio={worst:.6e}\npass={pass}\n", args.ensemble_seeds),
            pass,
            report,
        );
        if fanout != args.alpha {
            let mut cfg = EnsembleConfig::new(args.alpha, args.n, args.alpha, args.seed);
            cfg.threshold = 1e-8;
            let r = ensemble_equivalence_check(cfg)?;
            section(r.to_kv(), r.pass, report);
        }
    }
    if has(Prop::FanoutOne) {
        let adj = check_graph(&args.graph)?;
        let r = fanout_one_endpoint_test(&adj, args.source, args.k, args.walkers, &rng.substream(9), args.workers)?;
        let pass = r.p_value > 0.001;
        section(
            format!(
                "audit=fanout_one\nsource={}\nk={}\nwalkers={}\nchi_square={:.6}\ndof={}\np_value={:.6}\nthreshold=0.001\npass={pass}\n",
                args.source, args.k, args.walkers, r.statistic, r.dof, r.p_value
            ),
            pass,
            report,
        );
    }
    let _ = writeln!(report, "overall={}", if all_pass { "pass" } else { "fail" });
    Ok(all_pass)
}

fn cmd_check(args: &CheckArgs) -> Result<Outcome> {
    let mut run = Run::new("check", args, args.seed, args.out.clone())?;
    let mut report = String::new();
    let pass = run.phase("audits", || run_checks(args, &mut report))?;
    print!("{report}");
    run.write("report.txt", &report)?;
    run.finish()?;
    Ok(Outcome::from_pass(pass))
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match &cli.command {
        Command::GenGraph(a) => cmd_gen_graph(a),
        Command::EstimateTk(a) => cmd_estimate_tk(a),
        Command::Train { method } => match method {
            TrainCommand::Deepwalk(a) => cmd_train("train deepwalk", a, Method::DeepWalk, a),
            TrainCommand::Node2vec(a) => cmd_train("train node2vec", &a.train, Method::Node2Vec { p: a.p, q: a.q }, a),
            TrainCommand::Wys(a) => cmd_train("train wys", a, Method::Wys, a),
        },
        Command::EvalLinkpred(a) => cmd_eval_linkpred(a),
        Command::BenchTraverse(a) => cmd_bench(a),
        Command::Check(a) => cmd_check(a),
    }
}

/// Parse `std::env::args`, run, and map the result to an exit code:
/// 0 success, 1 audit failure, 2 usage or I/O error.
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::AuditFailure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
