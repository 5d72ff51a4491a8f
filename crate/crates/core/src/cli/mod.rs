//! `hetnoise` command-line front end: generate, train, sweep, evaluate.

mod manifest;

pub use manifest::{RunManifest, MANIFEST_FILE};

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::Error;
use crate::eval::{default_fractions, EvalReport, Target};
use crate::label::TaskKind;
use crate::noisegen::{self, read_jsonl, write_jsonl, BlobConfig, NoiseKind, NoiseProfile, NoisyDataset};
use crate::prob_head::McConfig;
use crate::sweep::{default_grid, run_sweep, validate_grid, SelectionMetric};
use crate::train::{fit, predict_dataset, Activation, HeadMode, HetModel, ModelSpec, OptimizerKind, TrainConfig};

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Runtime(Error::InvalidConfig(_)) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "hetnoise", version, about = "Heteroscedastic label-noise classification toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a noisy-label dataset with its noise oracle.
    Generate(GenerateArgs),
    /// Train one model.
    Train(TrainArgs),
    /// Train over a temperature grid and keep the best model.
    Sweep(SweepArgs),
    /// Score a model: metrics, discard test and uncertainty densities.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Multiclass,
    Multilabel,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub classes: usize,
    /// uniform_flip, region_ambiguity, stochastic_event or boundary_misalignment.
    #[arg(long)]
    pub profile: String,
    #[arg(long)]
    pub base_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Train,validation,test fractions, e.g. `0.7,0.2,0.1`.
    #[arg(long)]
    pub splits: Option<String>,
    /// Logit-gap margin of region_ambiguity.
    #[arg(long, default_value_t = 1.0)]
    pub margin: f64,
    /// Ramp width of boundary_misalignment.
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    /// Noisy class of stochastic_event.
    #[arg(long, default_value_t = 0)]
    pub event_class: usize,
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    #[arg(long, value_enum, default_value_t = TaskArg::Multiclass)]
    pub task: TaskArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeadArg {
    /// Probabilistic head with a tempered MC link.
    Prob,
    /// Probabilistic head at τ = 1.
    Het,
    /// Plain softmax/sigmoid head.
    Det,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ActivationArg {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

/// Architecture and optimization flags shared by `train` and `sweep`.
#[derive(Debug, Args)]
pub struct FitArgs {
    /// Hidden layer widths, comma separated; empty for a linear model.
    #[arg(long, default_value = "32")]
    pub hidden: String,
    #[arg(long, value_enum, default_value_t = ActivationArg::Tanh)]
    pub activation: ActivationArg,
    /// MC samples at prediction time.
    #[arg(long, default_value_t = McConfig::DEFAULT_SAMPLES)]
    pub mc_samples: usize,
    /// MC samples per training example; defaults to --mc-samples.
    #[arg(long)]
    pub train_mc_samples: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset file, or a directory holding `train.jsonl`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = HeadArg::Prob)]
    pub head: HeadArg,
    /// Temperature of the prob head (default 1).
    #[arg(long)]
    pub tau: Option<f64>,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Directory holding `train.jsonl` and `val.jsonl`.
    #[arg(long)]
    pub data: PathBuf,
    /// `default` or a comma separated list of temperatures.
    #[arg(long, default_value = "default")]
    pub grid: String,
    #[arg(long, default_value = "auprc")]
    pub metric: String,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AgainstArg {
    Noisy,
    Clean,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset file, or a directory holding `test.jsonl`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = AgainstArg::Noisy)]
    pub against: AgainstArg,
    /// `default` (0.0, 0.1, …, 0.9) or a comma separated list.
    #[arg(long, default_value = "default")]
    pub fractions: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses and runs a command line, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli.command, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("hetnoise: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, argv: &[String]) -> CliResult<()> {
    let start = Instant::now();
    let mut m = match command {
        Command::Generate(a) => cmd_generate(&a)?,
        Command::Train(a) => cmd_train(&a)?,
        Command::Sweep(a) => cmd_sweep(&a)?,
        Command::Evaluate(a) => cmd_evaluate(&a)?,
    };
    m.argv = argv.to_vec();
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    let dir = m.outputs[0].parent().map(Path::to_path_buf).unwrap_or_default();
    m.append_to(&dir)?;
    Ok(())
}

fn manifest(command: &str, config: serde_json::Value, seeds: &[(&str, u64)]) -> RunManifest {
    RunManifest {
        command: command.into(),
        argv: Vec::new(),
        config,
        seeds: seeds.iter().map(|&(k, v)| (k.to_string(), v)).collect::<BTreeMap<_, _>>(),
        inputs: Vec::new(),
        outputs: Vec::new(),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_clock_seconds: 0.0,
    }
}

fn parse_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("{what}: `{s}` is not a number")))
        })
        .collect()
}

fn parse_hidden(text: &str) -> CliResult<Vec<usize>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(usage(format!("--hidden: `{s}` is not a positive width"))),
        })
        .collect()
}

fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let grid = if text == "default" { default_grid() } else { parse_list(text, "--grid")? };
    validate_grid(&grid).map_err(|e| usage(format!("--grid: {e}")))?;
    Ok(grid)
}

fn parse_fractions(text: &str) -> CliResult<Vec<f64>> {
    if text == "default" {
        return Ok(default_fractions());
    }
    let f = parse_list(text, "--fractions")?;
    if f.len() < 2 || f.iter().any(|q| !(0.0..1.0).contains(q)) || f.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("--fractions needs at least two increasing values in [0, 1)"));
    }
    Ok(f)
}

fn load_dataset(path: &Path) -> CliResult<NoisyDataset> {
    let f = File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(read_jsonl(BufReader::new(f))?)
}

fn resolve_data(path: &Path, default_file: &str) -> PathBuf {
    if path.is_dir() {
        path.join(default_file)
    } else {
        path.to_path_buf()
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(())
}

fn write_dataset(path: &Path, ds: &NoisyDataset) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path).map_err(Error::from)?);
    write_jsonl(ds, &mut w)?;
    w.flush().map_err(Error::from)?;
    Ok(())
}

pub fn cmd_generate(a: &GenerateArgs) -> CliResult<RunManifest> {
    let kind: NoiseKind = a.profile.parse()?;
    let profile = match kind {
        NoiseKind::UniformFlip => NoiseProfile::uniform_flip(a.base_scale),
        NoiseKind::RegionAmbiguity => NoiseProfile::region_ambiguity(a.base_scale, a.margin),
        NoiseKind::StochasticEvent => NoiseProfile::stochastic_event(a.base_scale, a.event_class),
        NoiseKind::BoundaryMisalignment => NoiseProfile::boundary_misalignment(a.base_scale, a.width),
    };
    let blobs = BlobConfig {
        separation: a.separation,
        task: match a.task {
            TaskArg::Multiclass => TaskKind::Multiclass,
            TaskArg::Multilabel => TaskKind::Multilabel,
        },
        ..BlobConfig::default()
    };
    let splits = match &a.splits {
        None => None,
        Some(s) => {
            let v = parse_list(s, "--splits")?;
            let arr: [f64; 3] = v
                .try_into()
                .map_err(|_| usage("--splits needs exactly three fractions"))?;
            noisegen::split_sizes(a.n, arr).map_err(|e| usage(format!("--splits: {e}")))?;
            Some(arr)
        }
    };
    let ds = noisegen::generate(a.n, a.dim, a.classes, &profile, a.seed, &blobs)?;
    fs::create_dir_all(&a.out).map_err(Error::from)?;
    let mut outputs = Vec::new();
    match splits {
        None => {
            let p = a.out.join("data.jsonl");
            write_dataset(&p, &ds)?;
            outputs.push(p);
        }
        Some(fr) => {
            let parts = noisegen::split(&ds, fr, a.seed)?;
            for (name, part) in ["train", "val", "test"].iter().zip(&parts) {
                let p = a.out.join(format!("{name}.jsonl"));
                write_dataset(&p, part)?;
                outputs.push(p);
            }
        }
    }
    let config = json!({
        "n": a.n, "dim": a.dim, "classes": a.classes, "profile": profile,
        "blobs": blobs, "splits": splits,
    });
    let mut m = manifest("generate", config, &[("data", a.seed), ("split", a.seed)]);
    m.outputs = outputs;
    Ok(m)
}

fn train_config(f: &FitArgs) -> TrainConfig {
    TrainConfig {
        learning_rate: f.lr,
        batch_size: f.batch,
        epochs: f.epochs,
        optimizer: match f.optimizer {
            OptimizerArg::Adam => OptimizerKind::default(),
            OptimizerArg::Sgd => OptimizerKind::Sgd,
        },
        seed: f.seed,
        train_mc_samples: f.train_mc_samples.unwrap_or(f.mc_samples),
    }
}

fn model_spec(f: &FitArgs, data: &NoisyDataset, probabilistic: bool, tau: f64) -> CliResult<ModelSpec> {
    let head_mode = match (probabilistic, data.task()) {
        (false, _) => HeadMode::Deterministic,
        (true, TaskKind::Multiclass) => HeadMode::Multiclass,
        (true, TaskKind::Multilabel) => HeadMode::Multilabel,
    };
    let mut spec = ModelSpec::new(data.dim(), parse_hidden(&f.hidden)?, data.num_classes(), head_mode);
    spec.task = data.task();
    spec.activation = match f.activation {
        ActivationArg::Tanh => Activation::Tanh,
        ActivationArg::Relu => Activation::Relu,
    };
    spec.mc_config = McConfig::new(tau, f.mc_samples, f.seed).map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

fn print_log(log: &crate::train::TrainingLog) {
    for r in &log.epochs {
        eprintln!("epoch {} train_loss {}", r.epoch, r.train_loss);
    }
}

pub fn cmd_train(a: &TrainArgs) -> CliResult<RunManifest> {
    let tau = match (a.head, a.tau) {
        (HeadArg::Det, Some(_)) => return Err(usage("--tau applies only to --head prob")),
        (HeadArg::Het, Some(_)) => return Err(usage("--head het fixes τ = 1; use --head prob --tau")),
        (HeadArg::Prob, Some(t)) if !(t.is_finite() && t > 0.0) => return Err(usage("--tau must be positive")),
        (_, t) => t.unwrap_or(1.0),
    };
    let cfg = train_config(&a.fit);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let data_path = resolve_data(&a.data, "train.jsonl");
    let data = load_dataset(&data_path)?;
    let spec = model_spec(&a.fit, &data, a.head != HeadArg::Det, tau)?;
    let model = HetModel::new(&spec, a.fit.seed)?;
    let (model, log) = fit(model, &data, &cfg)?;
    print_log(&log);

    fs::create_dir_all(&a.out).map_err(Error::from)?;
    let model_path = a.out.join("model.json");
    let log_path = a.out.join("training_log.csv");
    write_file(&model_path, &model.to_json()?)?;
    write_file(&log_path, &log.to_csv())?;
    let config = json!({ "head": format!("{:?}", a.head).to_lowercase(), "model": spec, "train": cfg });
    let mut m = manifest("train", config, &[("init", a.fit.seed), ("train", cfg.seed), ("mc", a.fit.seed)]);
    m.inputs = vec![data_path];
    m.outputs = vec![model_path, log_path];
    Ok(m)
}

pub fn cmd_sweep(a: &SweepArgs) -> CliResult<RunManifest> {
    let grid = parse_grid(&a.grid)?;
    let metric: SelectionMetric = a.metric.parse().map_err(|e: Error| usage(e.to_string()))?;
    let cfg = train_config(&a.fit);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let train_path = a.data.join("train.jsonl");
    let val_path = a.data.join("val.jsonl");
    let train = load_dataset(&train_path)?;
    let val = load_dataset(&val_path)?;
    let spec = model_spec(&a.fit, &train, true, 1.0)?;
    let out = run_sweep(&train, &val, &spec, &cfg, &grid, metric, a.fit.seed)?;
    for row in &out.result.per_tau {
        eprintln!("tau {} {}", row.tau, row.status);
    }
    println!("{}", out.result.tau_star);

    fs::create_dir_all(&a.out).map_err(Error::from)?;
    let sweep_path = a.out.join("sweep.json");
    let model_path = a.out.join("model.json");
    let log_path = a.out.join("training_log.csv");
    write_file(&sweep_path, &out.result.to_json()?)?;
    write_file(&model_path, &out.model.to_json()?)?;
    write_file(&log_path, &out.log.to_csv())?;
    let config = json!({ "grid": grid, "metric": metric, "model": spec, "train": cfg });
    let mut m = manifest("sweep", config, &[("init", a.fit.seed), ("train", cfg.seed), ("mc", a.fit.seed)]);
    m.inputs = vec![train_path, val_path];
    m.outputs = vec![sweep_path, model_path, log_path];
    Ok(m)
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<RunManifest> {
    let fractions = parse_fractions(&a.fractions)?;
    let text = fs::read_to_string(&a.model).map_err(Error::from)?;
    let model = HetModel::from_json(&text)?;
    let data_path = resolve_data(&a.data, "test.jsonl");
    let data = load_dataset(&data_path)?;
    let target = match a.against {
        AgainstArg::Noisy => Target::Noisy,
        AgainstArg::Clean => Target::Clean,
    };
    if target == Target::Clean && data.clean_labels().is_none() {
        return Err(Error::invalid_input(format!(
            "--against clean needs clean labels, which {} does not contain",
            data_path.display()
        ))
        .into());
    }
    let mc = *model.mc_config();
    let preds = predict_dataset(&model, &data, &mc)?.retarget(target)?;
    let report = EvalReport::build(&preds, &fractions)?;

    fs::create_dir_all(&a.out).map_err(Error::from)?;
    let files = [
        ("report.json", report.to_json()?),
        ("discard.csv", report.discard.to_csv()),
        ("uncertainty.csv", report.uncertainty_csv()),
        ("histograms.csv", report.histogram_csv()),
    ];
    let mut outputs = Vec::new();
    for (name, body) in &files {
        let p = a.out.join(name);
        write_file(&p, body)?;
        outputs.push(p);
    }
    let config = json!({ "against": target, "fractions": fractions, "mc": mc });
    let mut m = manifest("evaluate", config, &[("mc", mc.seed)]);
    m.inputs = vec![a.model.clone(), data_path];
    m.outputs = outputs;
    Ok(m)
}
