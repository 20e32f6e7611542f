//! Command-line front end. Exit codes: 0 success, 1 usage, 2 runtime error.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::checks::{gradient_checks, manifold_suite, GradScope};
use crate::data::{gromov_delta, load_graph, split, synthetic_tree, DeltaMode, Graph};
use crate::encoder::Activation;
use crate::error::{Error, Result};
use crate::manifold::ModelKind;
use crate::pipeline::{
    class_distance_means, default_heatmap_nodes, evaluate, export_heatmap, train, Ablation, Metrics, Model,
    TrainConfig, ValMetric, View,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

const DEFAULT_D_FEAT: usize = 16;
const DEFAULT_NOISE: f64 = 1.0;

#[derive(Parser, Debug)]
#[command(name = "hgcl", version, about = "Two-view hyperbolic graph contrastive learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train and evaluate over one or more seeds.
    Train(TrainArgs),
    /// Compare tape gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Run the randomized manifold property suite.
    ManifoldTest(ManifoldTestArgs),
    /// Estimate Gromov δ-hyperbolicity.
    Delta(DeltaArgs),
    /// Export pairwise embedding distances for a set of nodes.
    Heatmap(HeatmapArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct GraphSource {
    /// Graph directory (edges.txt, features.csv, labels.csv[, splits.json]).
    #[arg(long, conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// Synthetic tree as `branching,depth`.
    #[arg(long, value_parser = parse_tree_spec)]
    synthetic: Option<(usize, usize)>,
    /// Feature dimension of the synthetic tree.
    #[arg(long)]
    d_feat: Option<usize>,
    /// Feature noise of the synthetic tree.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Train/val/test fractions, e.g. `0.2,0.2,0.6`; resplits per seed.
    #[arg(long, value_parser = parse_fractions)]
    split: Option<(f64, f64, f64)>,
    /// Flat JSON object whose keys mirror the flag names.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    /// tanh, relu or none.
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    kind_alpha: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    curvature_alpha: Option<f64>,
    #[arg(long)]
    kind_beta: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    curvature_beta: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    lambda_c: Option<f64>,
    #[arg(long)]
    lambda_n: Option<f64>,
    /// Negatives per anchor and source.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    bias: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Gradient-norm clip; 0 disables.
    #[arg(long)]
    clip: Option<f64>,
    /// accuracy or f1.
    #[arg(long)]
    val_metric: Option<String>,
    /// full, no_hpc, no_pos or no_dist.
    #[arg(long)]
    ablation: Option<String>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// primitives, manifold, encoder, hpc or all.
    #[arg(long, default_value = "all")]
    scope: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ManifoldTestArgs {
    /// Random instances per model.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DeltaArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Enumerate every quadruple (at most 60 nodes).
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HeatmapArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Seed of the synthetic graph.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// model.json written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// `default` (20 nodes of each of the first two classes) or a list of
    /// ids and ranges such as `0-19,40,41`.
    #[arg(long, default_value = "default")]
    nodes: String,
    /// alpha or beta.
    #[arg(long, default_value = "alpha")]
    view: String,
    #[arg(long)]
    out: PathBuf,
}

fn parse_tree_spec(s: &str) -> std::result::Result<(usize, usize), String> {
    let parts: Vec<_> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [b, h] => Ok((
            b.parse().map_err(|_| format!("bad branching `{b}`"))?,
            h.parse().map_err(|_| format!("bad depth `{h}`"))?,
        )),
        _ => Err(format!("expected `branching,depth`, got `{s}`")),
    }
}

fn parse_fractions(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad fraction `{t}`")))
        .collect::<std::result::Result<_, _>>()?;
    match v.as_slice() {
        &[a, b, c] => Ok((a, b, c)),
        _ => Err(format!("expected three fractions, got `{s}`")),
    }
}

/// Parses `0-19,40,41` into ids.
pub fn parse_node_spec(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("bad node spec `{s}`"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b.trim().parse().map_err(|_| bad())?;
                if b < a {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// Config file contents; every key is optional and mirrors a flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    data: Option<PathBuf>,
    synthetic: Option<String>,
    d_feat: Option<usize>,
    noise: Option<f64>,
    split: Option<[f64; 3]>,
    hidden_dim: Option<usize>,
    embed_dim: Option<usize>,
    layers: Option<usize>,
    activation: Option<String>,
    kind_alpha: Option<String>,
    curvature_alpha: Option<f64>,
    kind_beta: Option<String>,
    curvature_beta: Option<f64>,
    lr: Option<f64>,
    epochs: Option<usize>,
    patience: Option<usize>,
    lambda_c: Option<f64>,
    lambda_n: Option<f64>,
    m: Option<usize>,
    bias: Option<f64>,
    temperature: Option<f64>,
    clip: Option<f64>,
    val_metric: Option<String>,
    ablation: Option<String>,
    seeds: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Source {
    Data { dir: PathBuf },
    Synthetic { branching: usize, depth: usize, d_feat: usize, noise: f64 },
}

/// Effective settings of a training run after merging defaults, the config
/// file and flags.
#[derive(Clone, Debug, Serialize)]
struct Settings {
    source: Source,
    split: Option<(f64, f64, f64)>,
    seeds: Vec<u64>,
    train: TrainConfig,
}

fn parse_activation(s: &str) -> Result<Activation> {
    match s {
        "tanh" => Ok(Activation::Tanh),
        "relu" => Ok(Activation::Relu),
        "none" => Ok(Activation::None),
        _ => Err(Error::Config(format!("unknown activation '{s}'"))),
    }
}

fn resolve_source(src: &GraphSource, file: &FileConfig) -> Result<Source> {
    let synthetic = match (&src.synthetic, &file.synthetic) {
        (Some(s), _) => Some(*s),
        (None, Some(s)) => Some(parse_tree_spec(s).map_err(Error::Config)?),
        (None, None) => None,
    };
    let data = src.data.clone().or_else(|| file.data.clone());
    // a flag of either kind beats the config file
    let prefer_flag_data = src.data.is_some();
    match (data, synthetic) {
        (Some(dir), None) => Ok(Source::Data { dir }),
        (Some(dir), Some(_)) if prefer_flag_data => Ok(Source::Data { dir }),
        (_, Some((branching, depth))) => Ok(Source::Synthetic {
            branching,
            depth,
            d_feat: src.d_feat.or(file.d_feat).unwrap_or(DEFAULT_D_FEAT),
            noise: src.noise.or(file.noise).unwrap_or(DEFAULT_NOISE),
        }),
        (None, None) => Err(Error::Config("one of --data or --synthetic is required".into())),
    }
}

fn resolve(args: &TrainArgs) -> Result<Settings> {
    let file: FileConfig = match &args.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => FileConfig::default(),
    };
    let mut t = TrainConfig::default();
    macro_rules! pick {
        ($field:ident) => {
            args.$field.clone().or(file.$field.clone())
        };
    }
    if let Some(v) = pick!(hidden_dim) {
        t.hidden_dim = v;
    }
    if let Some(v) = pick!(embed_dim) {
        t.embed_dim = v;
    }
    if let Some(v) = pick!(layers) {
        t.layers = v;
    }
    if let Some(v) = pick!(activation) {
        t.activation = parse_activation(&v)?;
    }
    if let Some(v) = pick!(kind_alpha) {
        t.view_alpha.kind = v.parse::<ModelKind>()?;
    }
    if let Some(v) = pick!(curvature_alpha) {
        t.view_alpha.curvature = v;
    }
    if let Some(v) = pick!(kind_beta) {
        t.view_beta.kind = v.parse::<ModelKind>()?;
    }
    if let Some(v) = pick!(curvature_beta) {
        t.view_beta.curvature = v;
    }
    if let Some(v) = pick!(lr) {
        t.lr = v;
    }
    if let Some(v) = pick!(epochs) {
        t.epochs = v;
        t.patience = t.patience.min(v);
    }
    if let Some(v) = pick!(patience) {
        t.patience = v;
    }
    if let Some(v) = pick!(lambda_c) {
        t.lambda_c = v;
    }
    if let Some(v) = pick!(lambda_n) {
        t.hpc.lambda_n = v;
    }
    if let Some(v) = pick!(m) {
        t.hpc.m = v;
    }
    if let Some(v) = pick!(bias) {
        t.hpc.bias = v;
    }
    if let Some(v) = pick!(temperature) {
        t.hpc.temperature = v;
    }
    if let Some(v) = pick!(clip) {
        t.clip = (v > 0.0).then_some(v);
    }
    if let Some(v) = pick!(val_metric) {
        t.val_metric = v.parse::<ValMetric>()?;
    }
    if let Some(v) = pick!(ablation) {
        t.ablation = v.parse::<Ablation>()?;
    }
    t.validate()?;
    let split = args.split.or(file.split.map(|[a, b, c]| (a, b, c)));
    let seeds = pick!(seeds).unwrap_or_else(|| vec![0]);
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    Ok(Settings {
        source: resolve_source(&args.source, &file)?,
        split,
        seeds,
        train: t,
    })
}

fn graph_for_seed(settings: &Settings, loaded: Option<&Graph>, seed: u64) -> Result<Graph> {
    let mut g = match (&settings.source, loaded) {
        (Source::Data { .. }, Some(g)) => g.clone(),
        (Source::Synthetic { branching, depth, d_feat, noise }, _) => {
            synthetic_tree(*branching, *depth, *d_feat, *noise, seed)?
        }
        (Source::Data { dir }, None) => load_graph(dir)?,
    };
    if let Some(fr) = settings.split {
        g.set_masks(split(&g.labels, fr, seed)?);
    }
    g.validate()?;
    Ok(g)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn to_json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

/// SHA-256 over git-style blob framings (`blob <len>\0<bytes>`) of each input.
fn content_hash(parts: &[Vec<u8>]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(format!("blob {}\0", p.len()).as_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn input_blobs(settings: &Settings) -> Result<Vec<Vec<u8>>> {
    let mut blobs = Vec::new();
    if let Source::Data { dir } = &settings.source {
        for name in ["edges.txt", "features.csv", "labels.csv", "splits.json"] {
            let p = dir.join(name);
            if p.exists() {
                blobs.push(fs::read(p)?);
            }
        }
    }
    blobs.push(serde_json::to_vec(settings)?);
    Ok(blobs)
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    ablation: Ablation,
    best_epoch: usize,
    epochs_run: usize,
    best_val: f64,
    train: Metrics,
    val: Metrics,
    test: Metrics,
}

#[derive(Serialize)]
struct Stat {
    mean: f64,
    std: f64,
    values: Vec<f64>,
}

impl Stat {
    /// Mean and population standard deviation.
    fn of(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            values,
        }
    }

    fn percent(&self) -> String {
        format!("{:.2} ± {:.2}", 100.0 * self.mean, 100.0 * self.std)
    }
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let start = Instant::now();
    let settings = resolve(args)?;
    let loaded = match &settings.source {
        Source::Data { dir } => Some(load_graph(dir)?),
        Source::Synthetic { .. } => None,
    };
    fs::create_dir_all(&args.out)?;

    let runs: Vec<Result<(u64, SeedSummary, String, Model)>> = settings
        .seeds
        .par_iter()
        .map(|&seed| {
            let g = graph_for_seed(&settings, loaded.as_ref(), seed)?;
            let cfg = TrainConfig {
                seed,
                ..settings.train.clone()
            };
            let out = train(&g, &cfg)?;
            let mut stream = String::new();
            for r in &out.history {
                stream.push_str(&serde_json::to_string(r)?);
                stream.push('\n');
            }
            let summary = SeedSummary {
                seed,
                ablation: cfg.ablation,
                best_epoch: out.best_epoch,
                epochs_run: out.history.len(),
                best_val: out.best_val,
                train: evaluate(&out.model, &g, &g.train_mask)?,
                val: evaluate(&out.model, &g, &g.val_mask)?,
                test: evaluate(&out.model, &g, &g.test_mask)?,
            };
            Ok((seed, summary, stream, out.model))
        })
        .collect();

    let mut outputs = Vec::new();
    let mut acc = Vec::new();
    let mut f1 = Vec::new();
    for run in runs {
        let (seed, summary, stream, model) = run?;
        let dir = args.out.join(format!("seed_{seed}"));
        fs::create_dir_all(&dir)?;
        for (name, bytes) in [
            ("metrics.jsonl", stream.into_bytes()),
            ("summary.json", to_json_bytes(&summary)?),
            ("model.json", to_json_bytes(&model)?),
        ] {
            write_atomic(&dir.join(name), &bytes)?;
            outputs.push(format!("seed_{seed}/{name}"));
        }
        println!(
            "seed {seed}: test accuracy {:.4}, macro-F1 {:.4} (best epoch {})",
            summary.test.accuracy, summary.test.macro_f1, summary.best_epoch
        );
        acc.push(summary.test.accuracy);
        f1.push(summary.test.macro_f1);
    }
    let (acc, f1) = (Stat::of(acc), Stat::of(f1));
    println!(
        "{}: accuracy {}  macro-F1 {}",
        settings.train.ablation.name(),
        acc.percent(),
        f1.percent()
    );
    let aggregate = json!({
        "ablation": settings.train.ablation,
        "seeds": settings.seeds,
        "test_accuracy": acc,
        "test_macro_f1": f1,
        "report": {"accuracy": acc.percent(), "macro_f1": f1.percent()},
    });
    write_atomic(&args.out.join("aggregate.json"), &to_json_bytes(&aggregate)?)?;
    outputs.push("aggregate.json".into());

    let manifest = json!({
        "command": "train",
        "config": settings,
        "input_hash": content_hash(&input_blobs(&settings)?),
        "outputs": outputs,
        "duration_secs": start.elapsed().as_secs_f64(),
    });
    write_atomic(&args.out.join("manifest.json"), &to_json_bytes(&manifest)?)?;
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<bool> {
    let scope: GradScope = args.scope.parse()?;
    let results = gradient_checks(scope, args.seed)?;
    let mut ok = true;
    for r in &results {
        ok &= r.passed();
        println!(
            "{:<48} max_rel_err {:.3e}  threshold {:.0e}  {}",
            r.name,
            r.max_rel_err,
            r.threshold,
            if r.passed() { "ok" } else { "FAIL" }
        );
    }
    println!("{} checks, {}", results.len(), if ok { "all passed" } else { "FAILURES" });
    if let Some(p) = &args.out {
        write_atomic(p, &to_json_bytes(&results)?)?;
    }
    Ok(ok)
}

fn cmd_manifold_test(args: &ManifoldTestArgs) -> Result<bool> {
    if args.trials == 0 {
        eprintln!("warning: 0 trials requested; the suite passes vacuously");
    }
    let report = manifold_suite(args.trials, args.seed)?;
    for p in &report.properties {
        println!(
            "{:<32} worst {:.3e}  tolerance {:.0e}  failures {}  {}",
            p.name,
            p.worst,
            p.tolerance,
            p.failures,
            if p.passed() { "ok" } else { "FAIL" }
        );
        if let Some(f) = &p.first_failure {
            println!("  first failure: {f}");
        }
    }
    if let Some(p) = &args.out {
        write_atomic(p, &to_json_bytes(&report)?)?;
    }
    Ok(report.passed())
}

fn load_source(src: &GraphSource, seed: u64) -> Result<Graph> {
    match resolve_source(src, &FileConfig::default())? {
        Source::Data { dir } => load_graph(&dir),
        Source::Synthetic { branching, depth, d_feat, noise } => synthetic_tree(branching, depth, d_feat, noise, seed),
    }
}

fn cmd_delta(args: &DeltaArgs) -> Result<()> {
    let g = load_source(&args.source, args.seed)?;
    let mode = if args.exact {
        DeltaMode::Exact
    } else {
        DeltaMode::Sampled {
            quadruples: args.samples,
            seed: args.seed,
        }
    };
    let r = gromov_delta(&g, mode)?;
    if let Some(w) = &r.warning {
        eprintln!("warning: {w}");
    }
    let report = json!({
        "delta": r.delta,
        "mode": if args.exact { "exact" } else { "sampled" },
        "nodes_used": r.nodes_used,
        "quadruples": r.quadruples,
    });
    println!("{}", serde_json::to_string(&report)?);
    if let Some(p) = &args.out {
        write_atomic(p, &to_json_bytes(&report)?)?;
    }
    Ok(())
}

fn cmd_heatmap(args: &HeatmapArgs) -> Result<()> {
    let g = load_source(&args.source, args.seed)?;
    let model: Model = serde_json::from_str(&fs::read_to_string(&args.model)?)?;
    let nodes = if args.nodes == "default" {
        default_heatmap_nodes(&g.labels, 20, 2)
    } else {
        parse_node_spec(&args.nodes)?
    };
    let view: View = args.view.parse()?;
    let d = export_heatmap(&model, &g, &nodes, view, &args.out)?;
    let labels: Vec<usize> = nodes.iter().map(|&i| g.labels[i]).collect();
    let (intra, inter) = class_distance_means(&d, &labels);
    println!("{} nodes, mean intra-class distance {intra:.6}, mean inter-class distance {inter:.6}", nodes.len());
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Train(a) => cmd_train(a).map(|_| true),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::ManifoldTest(a) => cmd_manifold_test(a),
        Command::Delta(a) => cmd_delta(a).map(|_| true),
        Command::Heatmap(a) => cmd_heatmap(a).map(|_| true),
    };
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_RUNTIME,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
