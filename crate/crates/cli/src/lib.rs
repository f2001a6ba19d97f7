//! Command line driver for the event representation toolkit.
//!
//! Six subcommands cover the full loop: `synth` writes a labeled synthetic
//! corpus plus optional benchmark probe files, `cooc` precomputes document
//! co-occurrence counts, `train` fits an encoder and prototype bank, `eval`
//! scores a checkpoint on a benchmark file, `cluster-report` summarizes the
//! learned prototypes, and `sweep` retrains along one hyperparameter axis.
//! Identical invocations produce bit-identical outputs and no environment
//! variables are consulted; all randomness flows from the seed knobs.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use evrep::corpus::{
    build_cooccurrence, build_vocab, generate_synthetic, load_corpus, load_labels,
    write_synthetic, EventId, SynthSpec,
};
use evrep::eval::{
    cluster_report, export_pca, hard_sim_probes, hard_similarity_accuracy, load_hard_sim,
    load_mcnc, load_transitive, mcnc_accuracy, mcnc_probes, metrics_csv, transitive_probes,
    transitive_similarity, write_jsonl, write_metrics_csv, Aggregation, EventEncoder,
};
use evrep::numerics::Rng;
use evrep::trainer::{train, train_on, Checkpoint, TrainConfig};
use evrep::Error;

/// Parses `argv` and runs one subcommand, returning the process exit code:
/// 0 on success, 1 on a usage error, 2 on a runtime failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(matches) => matches,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return 1;
        }
    };
    init_logging(cli.quiet, cli.verbose);
    match dispatch(&cli, &matches) {
        Ok(()) => 0,
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            1
        }
        Err(Failure::Runtime(err)) => {
            eprintln!("error: {err}");
            2
        }
    }
}

/// A failed run, split by exit code.
enum Failure {
    /// Bad flag values or inconsistent options; exits 1.
    Usage(String),
    /// Anything that breaks after the command line was understood; exits 2.
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(err: Error) -> Failure {
        Failure::Runtime(err)
    }
}

fn usage(err: Error) -> Failure {
    Failure::Usage(err.to_string())
}

fn init_logging(quiet: bool, verbose: u8) {
    let level = if quiet {
        log::LevelFilter::Error
    } else {
        match verbose {
            0 => log::LevelFilter::Info,
            1 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .try_init();
}

#[derive(Parser)]
#[command(
    name = "evrep",
    version,
    about = "Train and probe event representations on one CPU core",
    after_help = "Exit codes: 0 success, 1 usage error, 2 runtime failure.",
    propagate_version = true
)]
struct Cli {
    /// Silence informational logging.
    #[arg(long, global = true)]
    quiet: bool,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic corpus and optional benchmark probes.
    Synth(SynthArgs),
    /// Precompute document co-occurrence counts for a corpus.
    Cooc(CoocArgs),
    /// Train an encoder and prototype bank on a corpus.
    Train(TrainArgs),
    /// Score a checkpoint on a benchmark file and print a metric CSV.
    Eval(EvalArgs),
    /// Summarize the prototype assignments of a checkpoint over a corpus.
    ClusterReport(ClusterReportArgs),
    /// Retrain along one hyperparameter axis and tabulate quality per value.
    Sweep(SweepArgs),
}

fn dispatch(cli: &Cli, matches: &ArgMatches) -> Result<(), Failure> {
    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand is required");
    match &cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Cooc(args) => run_cooc(args),
        Command::Train(args) => run_train(args, sub),
        Command::Eval(args) => run_eval(args),
        Command::ClusterReport(args) => run_cluster_report(args),
        Command::Sweep(args) => run_sweep(args, sub),
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Generator shape as a JSON file; omitted fields keep their defaults.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Output directory for corpus.jsonl and labels.jsonl.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Overrides the generator seed from the spec.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Also write N hard-similarity probes to hard_sim.jsonl.
    #[arg(long, value_name = "N")]
    hard_sim: Option<usize>,
    /// Keep dissimilar probe pairs token-disjoint instead of grafting one
    /// shared token; use this for chance-level baselines.
    #[arg(long)]
    balanced: bool,
    /// Also write N graded similarity probes to transitive.jsonl.
    #[arg(long, value_name = "N")]
    transitive: Option<usize>,
    /// Also write N narrative-cloze probes to mcnc.jsonl.
    #[arg(long, value_name = "N")]
    mcnc: Option<usize>,
    /// Candidates per cloze probe.
    #[arg(long, value_name = "K", default_value_t = 5)]
    candidates: usize,
    /// Context chain length per cloze probe.
    #[arg(long, value_name = "L", default_value_t = 3)]
    context_len: usize,
}

fn read_spec(path: &Path) -> Result<SynthSpec, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading spec {}", path.display()), e))?;
    let spec = serde_json::from_str(&text)
        .map_err(|e| Error::json(format!("parsing spec {}", path.display()), e))?;
    Ok(spec)
}

fn run_synth(args: &SynthArgs) -> Result<(), Failure> {
    for (flag, count) in [
        ("--hard-sim", args.hard_sim),
        ("--transitive", args.transitive),
        ("--mcnc", args.mcnc),
    ] {
        if count == Some(0) {
            return Err(Failure::Usage(format!("{flag} needs a positive count")));
        }
    }
    if args.mcnc.is_some() {
        if args.candidates < 2 {
            return Err(Failure::Usage("--candidates must be at least 2".into()));
        }
        if args.context_len == 0 {
            return Err(Failure::Usage("--context-len must be positive".into()));
        }
    }
    let mut spec = match &args.spec {
        Some(path) => read_spec(path)?,
        None => SynthSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let synth = generate_synthetic(&spec)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(format!("creating {}", args.out.display()), e))?;
    let corpus_path = args.out.join("corpus.jsonl");
    let labels_path = args.out.join("labels.jsonl");
    write_synthetic(&synth, &corpus_path, &labels_path)?;
    log::info!(
        "wrote {} events over {} documents to {}",
        synth.corpus.events.len(),
        synth.corpus.docs.len(),
        args.out.display()
    );
    let probes = Rng::new(spec.seed).split("probes");
    if let Some(n) = args.hard_sim {
        let mut rng = probes.split("hard_sim");
        let items = hard_sim_probes(&synth, n, args.balanced, &mut rng)?;
        let path = args.out.join("hard_sim.jsonl");
        write_jsonl(&items, &path)?;
        log::info!("wrote {n} hard-similarity probes to {}", path.display());
    }
    if let Some(n) = args.transitive {
        let mut rng = probes.split("transitive");
        let items = transitive_probes(&synth, n, &mut rng)?;
        let path = args.out.join("transitive.jsonl");
        write_jsonl(&items, &path)?;
        log::info!("wrote {n} graded similarity probes to {}", path.display());
    }
    if let Some(n) = args.mcnc {
        let mut rng = probes.split("mcnc");
        let items = mcnc_probes(&synth, n, args.candidates, args.context_len, &mut rng)?;
        let path = args.out.join("mcnc.jsonl");
        write_jsonl(&items, &path)?;
        log::info!("wrote {n} cloze probes to {}", path.display());
    }
    Ok(())
}

#[derive(Args)]
struct CoocArgs {
    /// Corpus JSONL to scan.
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Output path for the JSON co-occurrence table.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Drop events seen fewer than N times first; ids then refer to the
    /// filtered event table.
    #[arg(long, value_name = "N", default_value_t = 1)]
    min_event_freq: usize,
    /// Accepted for interface uniformity; counting is deterministic.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

fn run_cooc(args: &CoocArgs) -> Result<(), Failure> {
    if let Some(seed) = args.seed {
        log::debug!("ignoring seed {seed}; co-occurrence counting is deterministic");
    }
    let corpus = load_corpus(&args.corpus)?;
    let stats = if args.min_event_freq > 1 {
        let build = build_vocab(&corpus, args.min_event_freq)?;
        build_cooccurrence(&build.corpus)
    } else {
        build_cooccurrence(&corpus)
    };
    stats.save(&args.out)?;
    log::info!(
        "wrote co-occurrence counts over {} events to {}",
        stats.n_events(),
        args.out.display()
    );
    Ok(())
}

/// Every training knob as a string-valued flag whose default mirrors
/// [`TrainConfig::default`]; only flags present on the command line override
/// the config file.
#[derive(Args)]
struct TrainFlags {
    /// Objective: swcc, infonce_only or margin_only.
    #[arg(long, value_name = "NAME", default_value_t = dflt().objective.to_string())]
    objective: String,
    /// Anchors per optimization step.
    #[arg(long, value_name = "N", default_value_t = dflt().batch_size.to_string())]
    batch_size: String,
    /// Optimization steps to run.
    #[arg(long, value_name = "N", default_value_t = dflt().steps.to_string())]
    steps: String,
    /// Master seed for initialization, batching and view noise.
    #[arg(long, value_name = "N", default_value_t = dflt().seed.to_string())]
    seed: String,
    /// Representation dimension.
    #[arg(long, value_name = "N", default_value_t = dflt().d.to_string())]
    d: String,
    /// Token embedding dimension.
    #[arg(long, value_name = "N", default_value_t = dflt().d_emb.to_string())]
    d_emb: String,
    /// Contrastive softmax temperature.
    #[arg(long, value_name = "X", default_value_t = dflt().temperature.to_string())]
    temperature: String,
    /// Prototype softmax temperature, or "none" to reuse --temperature.
    #[arg(long, value_name = "X", default_value_t = proto_temperature_default())]
    proto_temperature: String,
    /// Number of prototypes.
    #[arg(long, value_name = "N", default_value_t = dflt().prototypes.to_string())]
    prototypes: String,
    /// Clustering term coefficient.
    #[arg(long, value_name = "X", default_value_t = dflt().beta.to_string())]
    beta: String,
    /// Masked-token term coefficient.
    #[arg(long, value_name = "X", default_value_t = dflt().gamma.to_string())]
    gamma: String,
    /// Encoder learning rate.
    #[arg(long, value_name = "X", default_value_t = dflt().lr_encoder.to_string())]
    lr_encoder: String,
    /// Prototype learning rate.
    #[arg(long, value_name = "X", default_value_t = dflt().lr_prototypes.to_string())]
    lr_prototypes: String,
    /// Token dropout rate used to make views.
    #[arg(long, value_name = "X", default_value_t = dflt().dropout_rate.to_string())]
    dropout_rate: String,
    /// Masking rate of the reconstruction term.
    #[arg(long, value_name = "X", default_value_t = dflt().mlm_rate.to_string())]
    mlm_rate: String,
    /// Entropic regularizer of the assignment solver.
    #[arg(long, value_name = "X", default_value_t = dflt().epsilon.to_string())]
    epsilon: String,
    /// Sinkhorn iterations per assignment.
    #[arg(long, value_name = "N", default_value_t = dflt().sinkhorn_iters.to_string())]
    sinkhorn_iters: String,
    /// Positive weighting mode: outside_log or literal.
    #[arg(long, value_name = "NAME", default_value_t = dflt().weight_mode.to_string())]
    weight_mode: String,
    /// Drop events seen fewer than N times before training.
    #[arg(long, value_name = "N", default_value_t = dflt().min_event_freq.to_string())]
    min_event_freq: String,
    /// Margin of the margin_only objective.
    #[arg(long, value_name = "X", default_value_t = dflt().margin.to_string())]
    margin: String,
    /// L2-normalize representations and prototypes (true or false).
    #[arg(long, value_name = "BOOL", default_value_t = dflt().normalize.to_string())]
    normalize: String,
    /// Reuse the first dropout view as the anchor view (true or false).
    #[arg(long, value_name = "BOOL", default_value_t = dflt().reuse_anchor_view.to_string())]
    reuse_anchor_view: String,
    /// Solve one joint assignment over both views (true or false).
    #[arg(long, value_name = "BOOL", default_value_t = dflt().joint_view_assignment.to_string())]
    joint_view_assignment: String,
    /// Positive sampling over co-occurring events: proportional or uniform.
    #[arg(long, value_name = "NAME", default_value_t = dflt().positive_sampling.to_string())]
    positive_sampling: String,
    /// Write a numbered checkpoint every N steps; 0 disables.
    #[arg(long, value_name = "N", default_value_t = dflt().checkpoint_every.to_string())]
    checkpoint_every: String,
}

fn dflt() -> TrainConfig {
    TrainConfig::default()
}

fn proto_temperature_default() -> String {
    match TrainConfig::default().proto_temperature {
        Some(value) => value.to_string(),
        None => "none".to_string(),
    }
}

/// Flag ids of [`TrainFlags`], doubling as [`TrainConfig::set`] keys.
const CONFIG_KEYS: &[&str] = &[
    "objective",
    "batch_size",
    "steps",
    "seed",
    "d",
    "d_emb",
    "temperature",
    "proto_temperature",
    "prototypes",
    "beta",
    "gamma",
    "lr_encoder",
    "lr_prototypes",
    "dropout_rate",
    "mlm_rate",
    "epsilon",
    "sinkhorn_iters",
    "weight_mode",
    "min_event_freq",
    "margin",
    "normalize",
    "reuse_anchor_view",
    "joint_view_assignment",
    "positive_sampling",
    "checkpoint_every",
];

/// Builds the effective config: defaults, then the config file, then any
/// flag given explicitly on the command line.
fn resolve_config(config: Option<&Path>, matches: &ArgMatches) -> Result<TrainConfig, Failure> {
    let mut cfg = match config {
        Some(path) => TrainConfig::from_file(path)?,
        None => TrainConfig::default(),
    };
    for key in CONFIG_KEYS {
        if matches.value_source(key) == Some(ValueSource::CommandLine) {
            let value: &String = matches.get_one(key).expect("typed flag");
            cfg.set(key, value).map_err(usage)?;
        }
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

#[derive(Args)]
struct TrainArgs {
    /// Training corpus JSONL.
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Output directory for checkpoint.json and metrics.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Config file of key=value lines; explicit flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainFlags,
}

fn run_train(args: &TrainArgs, matches: &ArgMatches) -> Result<(), Failure> {
    let cfg = resolve_config(args.config.as_deref(), matches)?;
    let outcome = train(&cfg, &args.corpus, &args.out)?;
    log::info!(
        "ran {} steps; checkpoint at {}, metrics at {}",
        outcome.steps_run,
        outcome.checkpoint_path.display(),
        outcome.metrics_path.display()
    );
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    /// Order a similar pair above a dissimilar pair.
    Hard,
    /// Rank pairs against graded gold scores.
    Transitive,
    /// Pick the held-out event of a document chain.
    Mcnc,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint JSON produced by train.
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    /// Benchmark protocol to run.
    #[arg(long, value_name = "TASK", value_enum)]
    task: Task,
    /// Benchmark items as JSONL.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Cloze context aggregation: mean, max or last.
    #[arg(long, value_name = "NAME", default_value_t = Aggregation::Mean, value_parser = parse_aggregation)]
    aggregation: Aggregation,
    /// Also write the metric CSV to this file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Accepted for interface uniformity; evaluation is deterministic.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn run_eval(args: &EvalArgs) -> Result<(), Failure> {
    if let Some(seed) = args.seed {
        log::debug!("ignoring seed {seed}; evaluation is deterministic");
    }
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let (vocab, state, _bank) = ckpt.restore()?;
    let enc = EventEncoder::new(&state, &vocab);
    let summary = match args.task {
        Task::Hard => hard_similarity_accuracy(&load_hard_sim(&args.data)?, &enc)?,
        Task::Transitive => transitive_similarity(&load_transitive(&args.data)?, &enc)?,
        Task::Mcnc => mcnc_accuracy(&load_mcnc(&args.data)?, &enc, args.aggregation)?,
    };
    let summaries = [summary];
    print!("{}", metrics_csv(&summaries));
    if let Some(path) = &args.out {
        write_metrics_csv(&summaries, path)?;
    }
    Ok(())
}

#[derive(Args)]
struct ClusterReportArgs {
    /// Checkpoint JSON produced by train.
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    /// Corpus whose events are assigned to prototypes.
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Events listed per prototype.
    #[arg(long, value_name = "K", default_value_t = 10)]
    top_k: usize,
    /// Ground-truth cluster labels JSONL; enables the purity line.
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,
    /// Write 2D PCA coordinates of every event to this CSV.
    #[arg(long, value_name = "FILE")]
    pca: Option<PathBuf>,
    /// Accepted for interface uniformity; the report is deterministic.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

fn run_cluster_report(args: &ClusterReportArgs) -> Result<(), Failure> {
    if let Some(seed) = args.seed {
        log::debug!("ignoring seed {seed}; the report is deterministic");
    }
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let (vocab, state, bank) = ckpt.restore()?;
    let enc = EventEncoder::new(&state, &vocab);
    let corpus = load_corpus(&args.corpus)?;
    let ids: Vec<EventId> = (0..corpus.events.len()).collect();
    let labels = match &args.labels {
        Some(path) => Some(load_labels(path)?),
        None => None,
    };
    let report = cluster_report(&ids, &corpus.events, &enc, &bank, args.top_k, labels.as_ref())?;
    println!("prototype,rank,event_id,score,event");
    for (proto, members) in report.top_events.iter().enumerate() {
        for (rank, (id, score)) in members.iter().enumerate() {
            let text = corpus.events.get(*id).expect("reported event id").text();
            println!("{proto},{},{id},{score},{}", rank + 1, csv_field(&text));
        }
    }
    for (proto, count) in report.histogram.iter().enumerate() {
        log::info!("prototype {proto}: {count} events");
    }
    if let Some(purity) = report.purity {
        log::info!("purity over {} events: {purity}", ids.len());
    }
    if let Some(path) = &args.pca {
        export_pca(&ids, &corpus.events, &enc, &bank, path)?;
        log::info!("wrote PCA coordinates to {}", path.display());
    }
    Ok(())
}

/// Quotes a CSV field only when it needs it.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    /// Contrastive softmax temperature.
    Tau,
    /// Clustering term coefficient.
    Beta,
    /// Masked-token term coefficient.
    Gamma,
    /// Number of prototypes.
    Prototypes,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Tau => "tau",
            SweepParam::Beta => "beta",
            SweepParam::Gamma => "gamma",
            SweepParam::Prototypes => "prototypes",
        }
    }

    fn config_key(self) -> &'static str {
        match self {
            SweepParam::Tau => "temperature",
            SweepParam::Beta => "beta",
            SweepParam::Gamma => "gamma",
            SweepParam::Prototypes => "prototypes",
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Hyperparameter axis to vary.
    #[arg(long, value_name = "NAME", value_enum)]
    param: SweepParam,
    /// Comma-separated values to train at.
    #[arg(long, value_name = "LIST", value_delimiter = ',', required = true)]
    values: Vec<String>,
    /// Generator shape of the shared synthetic corpus as a JSON file.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Keep per-value training artifacts under this directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Hard-similarity probes scored per value.
    #[arg(long, value_name = "N", default_value_t = 200)]
    probes: usize,
    /// Config file of key=value lines; explicit flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainFlags,
}

fn run_sweep(args: &SweepArgs, matches: &ArgMatches) -> Result<(), Failure> {
    if args.probes == 0 {
        return Err(Failure::Usage("--probes needs a positive count".into()));
    }
    let base = resolve_config(args.config.as_deref(), matches)?;
    let mut configs = Vec::with_capacity(args.values.len());
    for value in &args.values {
        let mut cfg = base.clone();
        cfg.set(args.param.config_key(), value).map_err(usage)?;
        cfg.validate().map_err(usage)?;
        configs.push(cfg);
    }
    let mut spec = match &args.spec {
        Some(path) => read_spec(path)?,
        None => SynthSpec::default(),
    };
    if matches.value_source("seed") == Some(ValueSource::CommandLine) {
        spec.seed = base.seed;
    }
    let synth = generate_synthetic(&spec)?;
    let labels: HashMap<EventId, usize> = synth.labels.iter().copied().enumerate().collect();
    let mut rng = Rng::new(spec.seed).split("sweep").split("probes");
    let probes = hard_sim_probes(&synth, args.probes, false, &mut rng)?;
    let scratch;
    let root: PathBuf = match &args.out {
        Some(dir) => dir.clone(),
        None => {
            scratch = tempfile::tempdir()
                .map_err(|e| Error::io("creating a scratch directory".to_string(), e))?;
            scratch.path().to_path_buf()
        }
    };
    let ids: Vec<EventId> = (0..synth.corpus.events.len()).collect();
    println!("param,value,purity,hard_similarity");
    for (value, cfg) in args.values.iter().zip(&configs) {
        let dir = root.join(format!("{}-{}", args.param.name(), value.replace('/', "_")));
        let outcome = train_on(cfg, &synth.corpus, &dir)?;
        let (vocab, state, bank) = outcome.checkpoint.restore()?;
        let enc = EventEncoder::new(&state, &vocab);
        let report = cluster_report(&ids, &synth.corpus.events, &enc, &bank, 1, Some(&labels))?;
        let purity = report.purity.expect("labels were supplied");
        let accuracy = hard_similarity_accuracy(&probes, &enc)?;
        println!("{},{value},{purity},{}", args.param.name(), accuracy.value);
        log::info!(
            "{}={value}: purity {purity:.4}, hard similarity {:.4} over {} probes",
            args.param.name(),
            accuracy.value,
            accuracy.items
        );
    }
    Ok(())
}
