//! Command-line interface. Exit codes: 0 success, 1 usage error, 2 data
//! error, 3 internal error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use echofinder_core::synth::Split;
use echofinder_core::{BoundingBox, SvWindow};

use crate::annotations::{read_annotations, DetectionFile};
use crate::config::PipelineConfig;
use crate::dataset::{generate_dataset, Dataset};
use crate::ech::load_echogram;
use crate::error::{Error, Result};
use crate::fsutil::{read_json, write_atomic, write_json};
use crate::model_io::{load_model, save_model};
use crate::pipeline::{
    detect_input, evaluate_detections, evaluate_model, extract_input, mine_dataset, train_model, Input, ModelKind,
};
use crate::pool::threads_from_env;
use crate::render::{detection_color, render_png, Color, GREEN};
use crate::run::{manifest_beside, manifest_in_dir, RunRecorder};
use crate::samples::SampleSet;

#[derive(Debug, Parser)]
#[command(name = "echofinder", version, about = "Detect fish schools in multifrequency echograms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Extract candidate regions (unclassified boxes).
    Extract(ExtractArgs),
    /// Mine labeled, balanced training crops from a dataset.
    Mine(MineArgs),
    /// Train a classifier on a mined sample set.
    Train(TrainArgs),
    /// Extract regions and classify them with a trained model.
    Detect(DetectArgs),
    /// Score detections against ground truth at several IoU thresholds.
    Evaluate(EvaluateArgs),
    /// Render one channel as PNG with box overlays.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// TOML pipeline configuration; defaults apply to anything omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

fn splits(args: &[SplitArg]) -> Vec<Split> {
    args.iter().map(|&s| s.into()).collect()
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of echograms.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Dataset directory or single `.ech` file.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output JSON file of boxes per echogram.
    #[arg(long)]
    pub out: PathBuf,
    /// Restrict a dataset to these splits (repeatable); default all.
    #[arg(long, value_enum)]
    pub split: Vec<SplitArg>,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output sample-set directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Splits to mine (repeatable); default train and val.
    #[arg(long, value_enum)]
    pub split: Vec<SplitArg>,
    /// Overrides the configured balancing seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Svm,
    Cnn,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Sample-set directory written by `mine`.
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Output `.emdl` model file.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured training seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Dataset directory or single `.ech` file.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Trained `.emdl` model.
    #[arg(long)]
    pub model: PathBuf,
    /// Output JSON file of labeled boxes per echogram.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub split: Vec<SplitArg>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Dataset directory holding the ground truth.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Detection file from `extract` or `detect`.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub detections: Option<PathBuf>,
    /// Run detection with this model instead of reading a detection file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// IoU thresholds, non-decreasing.
    #[arg(long, num_args = 1.., default_values_t = [0.0, 0.2, 0.4])]
    pub iou: Vec<f64>,
    #[arg(long, value_enum)]
    pub split: Vec<SplitArg>,
    /// Also write the report rows as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Echogram `.ech` file.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output PNG file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub channel: usize,
    /// Ground-truth annotation file, drawn in green.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Detection file; schools in red, background in black.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Echogram id inside the detection file; defaults to the file stem.
    #[arg(long)]
    pub id: Option<String>,
}

/// Parses arguments, runs the command and returns the exit code. Errors go
/// to standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("echofinder: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = threads_from_env()?;
    match cli.command {
        Command::Synth(a) => synth(a, threads),
        Command::Extract(a) => extract(a, threads),
        Command::Mine(a) => mine(a, threads),
        Command::Train(a) => train(a, threads),
        Command::Detect(a) => detect(a, threads),
        Command::Evaluate(a) => evaluate(a, threads),
        Command::Render(a) => render(a, threads),
    }
}

fn load_config(arg: &ConfigArg) -> Result<PipelineConfig> {
    PipelineConfig::load(arg.config.as_deref())
}

fn synth(a: SynthArgs, threads: usize) -> Result<()> {
    if a.n == 0 {
        return Err(Error::Usage("--n must be at least 1".into()));
    }
    let cfg = load_config(&a.config)?;
    let mut rec = RunRecorder::start("synth", cfg.hash(), Some(a.seed), threads);
    if let Some(p) = &a.config.config {
        rec.input(p);
    }
    let m = generate_dataset(&cfg.synth, a.n, a.seed, &a.out, threads)?;
    rec.output(&a.out);
    rec.finish(&manifest_in_dir(&a.out))?;
    let count = |s: Split| m.entries.iter().filter(|e| e.split == s).count();
    println!(
        "wrote {} echograms to {} ({} train, {} val, {} test)",
        m.entries.len(),
        a.out.display(),
        count(Split::Train),
        count(Split::Val),
        count(Split::Test)
    );
    Ok(())
}

fn extract(a: ExtractArgs, threads: usize) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let mut rec = RunRecorder::start("extract", cfg.hash(), None, threads);
    if let Some(p) = &a.config.config {
        rec.input(p);
    }
    let input = Input::open(&a.input, &splits(&a.split))?;
    rec.input(&a.input);
    let out = extract_input(&input, &cfg.roi, threads)?;
    write_json(&a.out, &out)?;
    rec.output(&a.out);
    rec.finish(&manifest_beside(&a.out))?;
    let n: usize = out.echograms.iter().map(|e| e.boxes.len()).sum();
    println!("extracted {n} regions from {} echograms", out.echograms.len());
    Ok(())
}

fn mine(a: MineArgs, threads: usize) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.mining.seed = seed;
    }
    let mut rec = RunRecorder::start("mine", cfg.hash(), Some(cfg.mining.seed), threads);
    if let Some(p) = &a.config.config {
        rec.input(p);
    }
    let dataset = Dataset::open(&a.dataset)?;
    rec.input(&a.dataset);
    let chosen = if a.split.is_empty() {
        vec![Split::Train, Split::Val]
    } else {
        splits(&a.split)
    };
    let m = mine_dataset(&dataset, &chosen, &cfg, &a.out, threads)?;
    rec.output(&a.out);
    rec.finish(&manifest_in_dir(&a.out))?;
    println!(
        "mined {} samples ({} positive, {} negative) into {}",
        m.samples.len(),
        m.count(echofinder_core::Label::HerringSchool),
        m.count(echofinder_core::Label::Background),
        a.out.display()
    );
    Ok(())
}

fn train(a: TrainArgs, threads: usize) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let kind = match a.model {
        ModelArg::Svm => ModelKind::Svm,
        ModelArg::Cnn => ModelKind::Cnn,
    };
    let seed = a.seed.unwrap_or(match kind {
        ModelKind::Svm => cfg.svm.seed,
        ModelKind::Cnn => cfg.cnn.seed,
    });
    let mut rec = RunRecorder::start("train", cfg.hash(), Some(seed), threads);
    if let Some(p) = &a.config.config {
        rec.input(p);
    }
    let set = SampleSet::open(&a.samples)?;
    rec.input(&a.samples);
    // Training is always single-threaded.
    let trained = train_model(&set, kind, &cfg, Some(seed))?;
    save_model(&a.out, &trained.model)?;
    rec.output(&a.out);
    let mut history_path = a.out.clone().into_os_string();
    history_path.push(".history.json");
    let history_path = PathBuf::from(history_path);
    write_json(&history_path, &trained.history)?;
    rec.output(&history_path);
    rec.finish(&manifest_beside(&a.out))?;
    println!(
        "trained {} on {} samples; final training objective {:.6}",
        kind.as_str(),
        set.manifest.samples.len(),
        trained.history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn detect(a: DetectArgs, threads: usize) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let mut rec = RunRecorder::start("detect", cfg.hash(), None, threads);
    if let Some(p) = &a.config.config {
        rec.input(p);
    }
    let model = load_model(&a.model)?;
    rec.input(&a.model);
    let input = Input::open(&a.input, &splits(&a.split))?;
    rec.input(&a.input);
    let out = detect_input(&input, &cfg.roi, &model, threads)?;
    write_json(&a.out, &out)?;
    rec.output(&a.out);
    rec.finish(&manifest_beside(&a.out))?;
    let (mut pos, mut total) = (0, 0);
    for e in &out.echograms {
        total += e.boxes.len();
        pos += e.boxes.iter().filter(|b| b.label.is_some_and(|l| l.is_positive())).count();
    }
    println!("{pos} of {total} regions classified as schools in {} echograms", out.echograms.len());
    Ok(())
}

fn evaluate(a: EvaluateArgs, threads: usize) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let mut rec = RunRecorder::start("evaluate", cfg.hash(), None, threads);
    if let Some(p) = &a.config.config {
        rec.input(p);
    }
    let dataset = Dataset::open(&a.dataset)?;
    rec.input(&a.dataset);
    let chosen = splits(&a.split);
    let report = match (&a.detections, &a.model) {
        (Some(path), None) => {
            let dets: DetectionFile = read_json(path)?;
            rec.input(path);
            evaluate_detections(&dataset, &chosen, &dets, path.display().to_string(), &a.iou, threads)?
        }
        (None, Some(path)) => {
            let model = load_model(path)?;
            rec.input(path);
            evaluate_model(&dataset, &chosen, &cfg.roi, &model, path.display().to_string(), &a.iou, threads)?
        }
        _ => return Err(Error::Usage("give exactly one of --detections or --model".into())),
    };
    print!("{}", report.table());
    if let Some(out) = &a.out {
        write_json(out, &report)?;
        rec.output(out);
        rec.finish(&manifest_beside(out))?;
    }
    Ok(())
}

fn render(a: RenderArgs, threads: usize) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let mut rec = RunRecorder::start("render", cfg.hash(), None, threads);
    if let Some(p) = &a.config.config {
        rec.input(p);
    }
    let e = load_echogram(&a.input)?;
    rec.input(&a.input);
    let mut overlays: Vec<(BoundingBox, Color)> = Vec::new();
    if let Some(path) = &a.detections {
        let dets: DetectionFile = read_json(path)?;
        rec.input(path);
        let id = a.id.clone().unwrap_or_else(|| stem(&a.input));
        let entry = dets
            .find(&id)
            .ok_or_else(|| Error::Data(format!("{} has no entry for echogram {id}", path.display())))?;
        for d in &entry.boxes {
            overlays.push((d.bbox()?, detection_color(d.label)));
        }
    }
    // Ground truth last so it stays visible where boxes coincide.
    if let Some(path) = &a.annotations {
        let file = read_annotations(path)?;
        rec.input(path);
        for ann in file.validate(e.width(), e.height())? {
            if ann.label.is_positive() {
                overlays.push((ann.bbox, GREEN));
            }
        }
    }
    let window: SvWindow = cfg.roi.sv_window;
    let png = render_png(&e, a.channel, window, &overlays)?;
    write_atomic(&a.out, &png)?;
    rec.output(&a.out);
    rec.finish(&manifest_beside(&a.out))?;
    println!("rendered channel {} with {} overlays to {}", a.channel, overlays.len(), a.out.display());
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
