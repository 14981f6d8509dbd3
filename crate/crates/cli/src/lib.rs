//! Command-line front end: argument parsing, the run configuration and one
//! function per subcommand. [`run`] maps every outcome to an exit code.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fftune::data::{
    ingest_directory, read_split_csv, stratified_split, synth_dataset, write_dataset_dir, write_split_csv, Dataset,
    Part, SynthSpec,
};
use fftune::metrics::{confusion_csv, confusion_matrix, read_predictions_csv, report_json, ConfusionMatrix, MetricsReport};
use fftune::model::{predict, Model};
use fftune::train::{
    checkpoint_bytes, checkpoint_load, evaluate, finetune, from_scratch, pretrain, TrainLog, SPLIT_RATIOS,
};
use fftune::vision::{decode_image, ImageFormat, ImageU8, Preprocess, SourceOrder};
use thiserror::Error;

use config::{resolve_seed, RunConfig, SEED_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] fftune::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            CliError::Core(fftune::Error::InvalidArgument(_)) => EXIT_USAGE,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "fftune", version, about = "Fine-tune small image classifiers and score them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan a class-per-directory tree and write its manifest CSV.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified train/val/test split of a dataset.
    Split {
        #[arg(long)]
        data: PathBuf,
        /// Train, validation and test fractions.
        #[arg(long, default_value = "0.8,0.1,0.1")]
        ratios: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic texture dataset as `<out>/<class>/<nnnnn>.ppm`.
    Synth {
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0.03)]
        noise: f64,
        /// 0 for the source textures, 1 for the shifted variant.
        #[arg(long, default_value_t = 0)]
        style: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train from scratch on `data.root`.
    Train(RunArgs),
    /// Pretrain on `data.source_root`, then fine-tune on `data.root`.
    Finetune(RunArgs),
    /// Score a checkpoint on one part of a split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long, default_value = "test")]
        part: String,
        #[arg(long, value_enum, default_value = "rgb")]
        channel_order: Order,
        /// Also record the prediction time in metrics.json (which makes the
        /// file differ between runs).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label image files (or directories of them) with a checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        images: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "rgb")]
        channel_order: Order,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics from a `predicted,actual` CSV; no model involved.
    Report {
        #[arg(long)]
        predictions: PathBuf,
        /// Comma-separated class names; defaults to class0, class1, ...
        #[arg(long)]
        classes: Option<String>,
        /// Number of classes when `--classes` is absent; defaults to the
        /// largest label + 1.
        #[arg(long)]
        num_classes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the confusion matrix CSV here.
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's `output` directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Order {
    Rgb,
    Bgr,
}

impl From<Order> for SourceOrder {
    fn from(o: Order) -> Self {
        match o {
            Order::Rgb => SourceOrder::Rgb,
            Order::Bgr => SourceOrder::Bgr,
        }
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    let env_seed = std::env::var(SEED_ENV).ok();
    let env_seed = env_seed.as_deref();
    match cmd {
        Command::Ingest { data, out } => {
            let d = ingest_directory(&data)?;
            write(&out, d.manifest_csv()?.as_bytes())?;
            println!("{} samples in {} classes", d.len(), d.num_classes());
        }
        Command::Split { data, ratios, seed, out } => {
            let d = load_dataset(&data)?;
            let ratios = parse_ratios(&ratios)?;
            let split = stratified_split(&d, ratios, resolve_seed(seed, env_seed, None)?)?;
            write(&out, write_split_csv(&split).as_bytes())?;
            println!(
                "train {} / val {} / test {}",
                split.train.len(),
                split.validation.len(),
                split.test.len()
            );
        }
        Command::Synth { classes, per_class, size, noise, style, seed, out } => {
            let seed = resolve_seed(seed, env_seed, None)?;
            let d = synth_dataset(&SynthSpec::new(classes, per_class, size, noise, seed).with_style(style))?;
            write_dataset_dir(&d, &out)?;
            println!("{} images written to {}", d.len(), out.display());
        }
        Command::Train(args) => run_training(args, env_seed, false)?,
        Command::Finetune(args) => run_training(args, env_seed, true)?,
        Command::Evaluate { checkpoint, data, split, part, channel_order, timing, out } => {
            let m = checkpoint_load(&checkpoint)?;
            let d = load_dataset(&data)?;
            let text = fs::read_to_string(&split).map_err(|e| fftune::Error::io(&split, e))?;
            let split = read_split_csv(&text)?;
            split.validate(d.len())?;
            let part = Part::parse(&part).ok_or_else(|| CliError::Usage(format!("unknown split part {part:?}")))?;
            let start = std::time::Instant::now();
            let cm = score(&m, &d, split.part(part), channel_order.into())?;
            let secs = start.elapsed().as_secs_f64();
            let report = MetricsReport::from_confusion(&cm, timing.then_some(secs))?;
            write_metrics(&out, &cm, &report)?;
            println!("accuracy {:.2}% on {} samples ({secs:.3} s)", report.accuracy_pct, report.n);
        }
        Command::Predict { checkpoint, images, channel_order, out } => {
            let m = checkpoint_load(&checkpoint)?;
            let files = collect_images(&images)?;
            let order = SourceOrder::from(channel_order).channel_order();
            let imgs = files.iter().map(|p| load_image(p, order)).collect::<Result<Vec<ImageU8>>>()?;
            let pred = predict(&m, &imgs, &Preprocess::new(m.input_side()))?;
            let mut tsv = String::from("path\tlabel\tclass\tprobability\n");
            let k = classes_of(&m)?;
            for (i, (path, &label)) in files.iter().zip(&pred.labels).enumerate() {
                let p = pred.probs.data()[i * k + label];
                let name = &m.class_names()[label];
                tsv.push_str(&format!("{}\t{label}\t{name}\t{p:.6}\n", path.display()));
            }
            write(&out, tsv.as_bytes())?;
            println!("elapsed_seconds\t{:.6}", pred.elapsed_seconds);
        }
        Command::Report { predictions, classes, num_classes, out, confusion } => {
            let text = fs::read_to_string(&predictions).map_err(|e| fftune::Error::io(&predictions, e))?;
            let (pred, actual) = read_predictions_csv(&text)?;
            let names: Vec<String> = match &classes {
                Some(c) => c.split(',').map(|s| s.trim().to_string()).collect(),
                None => Vec::new(),
            };
            let seen = pred.iter().chain(&actual).max().map_or(0, |m| m + 1);
            let k = if names.is_empty() { num_classes.unwrap_or(seen.max(2)) } else { names.len() };
            let cm = confusion_matrix(&pred, &actual, k)?;
            let cm = ConfusionMatrix::from_counts(cm.counts().to_vec(), names)?;
            let report = MetricsReport::from_confusion(&cm, None)?;
            write(&out, report_json(&report)?.as_bytes())?;
            if let Some(path) = confusion {
                write(&path, confusion_csv(&cm)?.as_bytes())?;
            }
            println!("accuracy {:.2}% on {} samples", report.accuracy_pct, report.n);
        }
    }
    Ok(())
}

/// `train` and `finetune`. Everything lands in the output directory; all
/// files are deterministic for a fixed seed, so wall-clock times are only
/// printed.
fn run_training(args: RunArgs, env_seed: Option<&str>, transfer: bool) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let seed = resolve_seed(args.seed, env_seed, cfg.train.seed)?;
    let tc = cfg.transfer_config(seed)?;
    let out = args
        .out
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| CliError::Usage("no output directory: set `output` in the config or pass --out".into()))?;
    let root = cfg.data.root.as_ref().ok_or_else(|| CliError::Usage("config needs data.root".into()))?;
    let target = load_dataset(root)?;
    let source = if transfer {
        let src = cfg
            .data
            .source_root
            .as_ref()
            .ok_or_else(|| CliError::Usage("finetune needs data.source_root".into()))?;
        Some(load_dataset(src)?)
    } else {
        None
    };
    fs::create_dir_all(&out).map_err(|e| fftune::Error::io(&out, e))?;

    let (model, log, split) = match &source {
        Some(source) => {
            let (pre, pre_log, pre_split) = pretrain(source, &tc)?;
            write(&out.join("source_split.csv"), write_split_csv(&pre_split).as_bytes())?;
            write(&out.join("pretrain_log.csv"), pre_log.to_csv().as_bytes())?;
            write(&out.join("pretrained.ckpt"), &checkpoint_bytes(&pre)?)?;
            report_log("pretrain", &pre_log);
            finetune(&pre, &target, &tc)?
        }
        None => from_scratch(&target, &tc)?,
    };
    report_log(if transfer { "finetune" } else { "train" }, &log);

    let resolved = serde_json::json!({
        "seed": seed,
        "split_ratios": [SPLIT_RATIOS.0, SPLIT_RATIOS.1, SPLIT_RATIOS.2],
        "backbone": tc.backbone,
        "head": tc.head,
        "pretrain": transfer.then_some(&tc.pretrain),
        "train": tc.finetune,
    });
    let mut resolved = serde_json::to_string_pretty(&resolved).map_err(fftune::Error::from)?;
    resolved.push('\n');
    write(&out.join("resolved_config.json"), resolved.as_bytes())?;
    write(&out.join("split.csv"), write_split_csv(&split).as_bytes())?;
    write(&out.join("train_log.csv"), log.to_csv().as_bytes())?;
    write(&out.join("model.ckpt"), &checkpoint_bytes(&model)?)?;
    let cm = score(&model, &target, &split.test, tc.finetune.source_order)?;
    let report = MetricsReport::from_confusion(&cm, None)?;
    write_metrics(&out, &cm, &report)?;
    println!("test accuracy {:.2}% on {} samples", report.accuracy_pct, report.n);
    Ok(())
}

fn report_log(stage: &str, log: &TrainLog) {
    if let Some(r) = log.final_row() {
        println!(
            "{stage}: {} epochs in {:.1} s, final train acc {:.2}%, val acc {:.2}%",
            log.rows.len(),
            log.wall_seconds,
            r.train_acc,
            r.val_acc
        );
    }
}

fn score(m: &Model, d: &Dataset, indices: &[usize], order: SourceOrder) -> Result<ConfusionMatrix> {
    let ev = evaluate(m, d, indices, order)?;
    let cm = confusion_matrix(&ev.predicted, &ev.actual, classes_of(m)?)?;
    Ok(ConfusionMatrix::from_counts(cm.counts().to_vec(), m.class_names().to_vec())?)
}

fn classes_of(m: &Model) -> Result<usize> {
    m.num_classes()
        .ok_or_else(|| fftune::Error::Checkpoint("checkpoint holds a backbone without a classifier head".into()).into())
}

fn write_metrics(dir: &Path, cm: &ConfusionMatrix, report: &MetricsReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| fftune::Error::io(dir, e))?;
    write(&dir.join("metrics.json"), report_json(report)?.as_bytes())?;
    write(&dir.join("confusion.csv"), confusion_csv(cm)?.as_bytes())
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| fftune::Error::io(path, e).into())
}

/// A directory is ingested; a file is read as a manifest CSV.
fn load_dataset(path: &Path) -> Result<Dataset> {
    if path.is_dir() {
        return Ok(ingest_directory(path)?);
    }
    let text = fs::read_to_string(path).map_err(|e| fftune::Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let name = path.file_stem().map_or("manifest".into(), |s| s.to_string_lossy().into_owned());
    Ok(Dataset::from_manifest_csv(&name, &text, base)?)
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64)> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--ratios expects three numbers, got {s:?}")))?;
    match v[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(CliError::Usage(format!("--ratios expects three numbers, got {s:?}"))),
    }
}

/// Files are taken as given; directories contribute their image files in
/// name order.
fn collect_images(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner = Vec::new();
            for entry in fs::read_dir(p).map_err(|e| fftune::Error::io(p, e))? {
                let path = entry.map_err(|e| fftune::Error::io(p, e))?.path();
                if path.is_file() && ImageFormat::from_path(&path).is_some() {
                    inner.push(path);
                }
            }
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::Usage("no image files given".into()));
    }
    Ok(files)
}

fn load_image(path: &Path, order: fftune::vision::ChannelOrder) -> Result<ImageU8> {
    let fmt = ImageFormat::from_path(path)
        .ok_or_else(|| fftune::Error::Data(format!("{}: unsupported image extension", path.display())))?;
    let bytes = fs::read(path).map_err(|e| fftune::Error::io(path, e))?;
    Ok(decode_image(&bytes, fmt, order)?)
}
