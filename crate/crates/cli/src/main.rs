use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fairdrop::dyadic::{self, DyadicScheme, GroupPolicy, DEFAULT_THRESHOLD};
use fairdrop::embedding::{embed, EmbeddingMatrix, WalkConfig};
use fairdrop::fairdrop::{edge_dropout, fair_epoch_graph, DropoutMode, FairDropConfig};
use fairdrop::gcn::{train_link_predictor, TrainConfig};
use fairdrop::graph::{load_attributes, load_dataset, split_edges, write_edges, Dataset};
use fairdrop::harness::{self, ExperimentSpec};
use fairdrop::rb::{rb_report, LogisticProbe};
use serde_json::json;

#[derive(Parser)]
#[command(name = "fairdrop", version, about = "Biased edge dropout experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one dropout-mode copy of a graph.
    Sample(SampleArgs),
    /// Train random-walk embeddings.
    Embed(EmbedArgs),
    /// Train and evaluate the GCN link predictor.
    TrainGcn(TrainGcnArgs),
    /// Dyadic fairness metrics for a predictions file.
    EvalFairness(EvalFairnessArgs),
    /// Representation bias of an embedding file.
    EvalRb(EvalRbArgs),
    /// Run a delta/seed grid from a JSON experiment spec.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct GraphInput {
    /// Edge list, one `a b` pair per line.
    #[arg(long)]
    edges: PathBuf,
    /// Attribute file, `node,attr` per line.
    #[arg(long)]
    attrs: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    None,
    Edgedrop,
    Fairdrop,
}

#[derive(Args)]
struct ModeArgs {
    #[arg(long, value_enum, default_value = "fairdrop")]
    mode: Mode,
    /// FairDrop bias in [0, 0.5].
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    /// Unbiased dropout rate.
    #[arg(long, default_value_t = 0.5)]
    drop_rate: f64,
}

impl ModeArgs {
    fn mode(&self) -> DropoutMode {
        match self.mode {
            Mode::None => DropoutMode::None,
            Mode::Edgedrop => DropoutMode::EdgeDrop { p: self.drop_rate },
            Mode::Fairdrop => DropoutMode::FairDrop { delta: self.delta },
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    input: GraphInput,
    #[command(flatten)]
    mode: ModeArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    epoch: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    #[command(flatten)]
    input: GraphInput,
    #[command(flatten)]
    mode: ModeArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    walks_per_node: usize,
    #[arg(long, default_value_t = 30)]
    walk_length: usize,
    #[arg(long, default_value_t = 10)]
    window: usize,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Embedding CSV output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainGcnArgs {
    #[command(flatten)]
    input: GraphInput,
    /// Optional dense feature CSV, one row per node.
    #[arg(long)]
    features: Option<PathBuf>,
    #[command(flatten)]
    mode: ModeArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.005)]
    lr: f64,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    skip_deficient: bool,
    #[arg(long)]
    report: PathBuf,
    /// Also write test-pair scores as `src,dst,score,label`.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct EvalFairnessArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    attrs: PathBuf,
    /// Dyadic schemes; all three when omitted.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<DyadicScheme>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    skip_deficient: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalRbArgs {
    #[arg(long)]
    emb: PathBuf,
    #[arg(long)]
    attrs: PathBuf,
    /// Edge list for link RB; node RB only when omitted.
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    spec: PathBuf,
}

fn policy(skip_deficient: bool) -> GroupPolicy {
    if skip_deficient {
        GroupPolicy::SkipDeficient
    } else {
        GroupPolicy::Strict
    }
}

fn load(input: &GraphInput, features: Option<&Path>) -> Result<Dataset> {
    let d = load_dataset(&input.edges, &input.attrs, features)
        .with_context(|| format!("loading {}", input.edges.display()))?;
    if d.self_loops_dropped > 0 {
        eprintln!("dropped {} self-loops", d.self_loops_dropped);
    }
    Ok(d)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn emit(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    let d = load(&args.input, None)?;
    let copy = match args.mode.mode() {
        DropoutMode::None => d.graph.clone(),
        DropoutMode::EdgeDrop { p } => edge_dropout(&d.graph, p, args.seed, args.epoch)?,
        DropoutMode::FairDrop { delta } => {
            let cfg = FairDropConfig::new(delta, args.seed)?;
            fair_epoch_graph(&d.graph, &d.attrs, &cfg, args.epoch)?
        }
    };
    let mut w = create(&args.out)?;
    write_edges(&copy, &mut w)?;
    w.flush()?;
    eprintln!("kept {} of {} edges", copy.edge_count(), d.graph.edge_count());
    Ok(())
}

fn embed_cmd(args: EmbedArgs) -> Result<()> {
    let d = load(&args.input, None)?;
    let cfg = WalkConfig {
        dim: args.dim,
        epochs: args.epochs,
        walks_per_node: args.walks_per_node,
        walk_length: args.walk_length,
        window: args.window,
        p: args.p,
        q: args.q,
        seed: args.seed,
        ..WalkConfig::default()
    };
    let z = embed(&d.graph, &d.attrs, args.mode.mode(), &cfg)?;
    let mut w = create(&args.out)?;
    z.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn train_gcn(args: TrainGcnArgs) -> Result<()> {
    let d = load(&args.input, args.features.as_deref())?;
    let split = split_edges(&d.graph, args.test_fraction, args.seed)?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        lr: args.lr,
        hidden: args.hidden,
        mode: args.mode.mode(),
        seed: args.seed,
        threshold: args.threshold,
    };
    let run = train_link_predictor(&split, d.graph.n(), d.features.as_ref(), &d.attrs, &cfg)?;
    let (metrics, fairness) =
        harness::gcn_metrics(&run, &d, &DyadicScheme::ALL, policy(args.skip_deficient))?;
    if let Some(path) = &args.predictions {
        let mut w = create(path)?;
        dyadic::write_predictions(&mut w, &run.test_pairs, &run.batch)?;
        w.flush()?;
    }
    let report = json!({
        "config": cfg,
        "mode": cfg.mode.name(),
        "test_pairs": run.test_pairs.len(),
        "initial_loss": run.losses.first(),
        "final_loss": run.losses.last(),
        "metrics": metrics,
        "fairness": fairness,
    });
    emit(&report, Some(&args.report))
}

fn eval_fairness(args: EvalFairnessArgs) -> Result<()> {
    let (attrs, _) = load_attributes(&args.attrs)?;
    let file = File::open(&args.predictions)
        .with_context(|| format!("opening {}", args.predictions.display()))?;
    let (pairs, batch) = dyadic::read_predictions(file, args.threshold)?;
    let schemes = if args.scheme.is_empty() {
        DyadicScheme::ALL.to_vec()
    } else {
        args.scheme.clone()
    };
    let records = schemes
        .into_iter()
        .map(|s| dyadic::evaluate(&batch, &pairs, &attrs, s, policy(args.skip_deficient)))
        .collect::<fairdrop::Result<Vec<_>>>()?;
    emit(&json!({ "threshold": args.threshold, "records": records }), args.out.as_deref())
}

fn eval_rb(args: EvalRbArgs) -> Result<()> {
    let z = EmbeddingMatrix::read_csv(
        File::open(&args.emb).with_context(|| format!("opening {}", args.emb.display()))?,
    )?;
    let (attrs, edges) = match &args.edges {
        Some(e) => {
            let d = load_dataset(e, &args.attrs, None::<&Path>)?;
            (d.attrs, Some(d.graph.edges().to_vec()))
        }
        None => (load_attributes(&args.attrs)?.0, None),
    };
    let report = rb_report(&z, edges.as_deref(), &attrs, &LogisticProbe::default(), args.seed)?;
    emit(&serde_json::to_value(report)?, args.out.as_deref())
}

fn ablate(args: AblateArgs) -> Result<bool> {
    let spec = ExperimentSpec::from_json_file(&args.spec)?;
    let outcome = harness::run_ablation(&spec)?;
    for r in outcome.failures() {
        eprintln!(
            "run delta={} seed={} failed: {}",
            r.delta,
            r.seed,
            r.error.as_deref().unwrap_or("unknown error")
        );
    }
    eprintln!(
        "{} runs, {} failed; report in {}",
        outcome.records.len(),
        outcome.failures().count(),
        spec.output_dir.display()
    );
    Ok(outcome.all_ok())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(a) => sample(a).map(|_| true),
        Command::Embed(a) => embed_cmd(a).map(|_| true),
        Command::TrainGcn(a) => train_gcn(a).map(|_| true),
        Command::EvalFairness(a) => eval_fairness(a).map(|_| true),
        Command::EvalRb(a) => eval_rb(a).map(|_| true),
        Command::Ablate(a) => ablate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
