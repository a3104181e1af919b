//! `crowdtex` subcommands: synth, train, score, merge, train-clf, eval.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crowd_anomaly::cubes::CubeSpec;
use crowd_anomaly::dyntex::FeatureVector;
use crowd_anomaly::evalharness::{evaluate_runs, EvalReport, RunSource};
use crowd_anomaly::eventclf::{self, MaxEntRecord, TrainConfig};
use crowd_anomaly::frame_io::{
    generate_synthetic_sequence, load_frame_sequence, load_manifest, synthetic_manifest_entry,
    write_atomic, write_frame_sequence, DatasetManifest, Label, SynthConfig,
};
use crowd_anomaly::gaussmodel::{
    calibrate_threshold, merge_models, GaussianModel, GaussianModelRecord,
};
use crowd_anomaly::pipeline::{
    cube_labels, overlay_frames, range_features, score_sequence, sequence_features, train_normalcy,
    PipelineConfig,
};
use crowd_anomaly::{Error as CoreError, Execution};

pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERIC: i32 = 4;
}

/// A usage problem detected after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Maps an error chain onto the documented exit codes.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return exit::USAGE;
        }
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::InvalidConfig(_) => exit::USAGE,
                CoreError::Numeric(_) => exit::NUMERIC,
                _ => exit::DATA,
            };
        }
    }
    exit::DATA
}

#[derive(Debug, Parser)]
#[command(
    name = "crowdtex",
    version,
    about = "Crowd anomaly detection with dynamic textures"
)]
pub struct Cli {
    /// JSON file with default values for any flag (flags take precedence).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic crowd sequence plus its manifest.
    Synth(SynthArgs),
    /// Fit the normalcy model on the normal intervals of a manifest.
    Train(TrainArgs),
    /// Score every frame of one manifest entry against a trained model.
    Score(ScoreArgs),
    /// Fold the normal cubes of another manifest into an existing model.
    Merge(MergeArgs),
    /// Train the log-linear event classifier on labeled cubes.
    TrainClf(TrainClfArgs),
    /// Repeat train/score/compare over several runs and report accuracy.
    ///
    /// A run is one seed of the synthetic generator (seed = base seed + run
    /// index) or, with --manifest, one manifest entry.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct PipelineFlags {
    #[arg(long)]
    pub cube_p: Option<usize>,
    #[arg(long)]
    pub cube_q: Option<usize>,
    #[arg(long)]
    pub spatial_stride: Option<usize>,
    #[arg(long)]
    pub temporal_stride: Option<usize>,
    #[arg(long)]
    pub state_dim: Option<usize>,
    /// Percentile of training scores used as the anomaly threshold.
    #[arg(long)]
    pub percentile: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SynthFlags {
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub dispersal_frame: Option<usize>,
    #[arg(long)]
    pub speed_normal: Option<f64>,
    #[arg(long)]
    pub speed_abnormal: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ClassifierFlags {
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub synth: SynthFlags,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (frames/ and manifest.json are written inside).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
    /// Model JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Index of the manifest entry to score.
    #[arg(long, default_value_t = 0)]
    pub entry: usize,
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
    /// Per-frame CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for PGM frames with anomalous cubes highlighted.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainClfArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
    #[command(flatten)]
    pub classifier: ClassifierFlags,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Evaluate manifest entries instead of synthetic sequences.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
    #[command(flatten)]
    pub synth: SynthFlags,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Base seed; run r uses seed + r.
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV report path; a JSON twin is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

/// Values from `--config`; same vocabulary as the flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub cube_p: Option<usize>,
    pub cube_q: Option<usize>,
    pub spatial_stride: Option<usize>,
    pub temporal_stride: Option<usize>,
    pub state_dim: Option<usize>,
    pub percentile: Option<f64>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub particles: Option<usize>,
    pub frames: Option<usize>,
    pub dispersal_frame: Option<usize>,
    pub speed_normal: Option<f64>,
    pub speed_abnormal: Option<f64>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub l2: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| usage(format!("invalid config file {}: {e}", path.display())))
    }

    pub fn pipeline(&self, flags: &PipelineFlags) -> Result<PipelineConfig> {
        let defaults = PipelineConfig::default();
        let p = flags.cube_p.or(self.cube_p).unwrap_or(defaults.cube.p);
        let q = flags.cube_q.or(self.cube_q).unwrap_or(defaults.cube.q);
        let cfg = PipelineConfig {
            cube: CubeSpec {
                p,
                q,
                spatial_stride: flags.spatial_stride.or(self.spatial_stride).unwrap_or(p),
                temporal_stride: flags.temporal_stride.or(self.temporal_stride).unwrap_or(q),
            },
            state_dim: flags
                .state_dim
                .or(self.state_dim)
                .unwrap_or(defaults.state_dim),
            percentile: flags
                .percentile
                .or(self.percentile)
                .unwrap_or(defaults.percentile),
            classifier: TrainConfig {
                seed: self.seed.unwrap_or(0),
                learning_rate: self
                    .learning_rate
                    .unwrap_or(defaults.classifier.learning_rate),
                epochs: self.epochs.unwrap_or(defaults.classifier.epochs),
                l2: self.l2.unwrap_or(defaults.classifier.l2),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn synth(&self, flags: &SynthFlags) -> Result<SynthConfig> {
        let d = SynthConfig::default();
        let cfg = SynthConfig {
            width: flags.width.or(self.width).unwrap_or(d.width),
            height: flags.height.or(self.height).unwrap_or(d.height),
            n_particles: flags.particles.or(self.particles).unwrap_or(d.n_particles),
            n_frames: flags.frames.or(self.frames).unwrap_or(d.n_frames),
            dispersal_frame: flags
                .dispersal_frame
                .or(self.dispersal_frame)
                .unwrap_or(d.dispersal_frame),
            speed_normal: flags
                .speed_normal
                .or(self.speed_normal)
                .unwrap_or(d.speed_normal),
            speed_abnormal: flags
                .speed_abnormal
                .or(self.speed_abnormal)
                .unwrap_or(d.speed_abnormal),
        };
        if cfg.dispersal_frame >= cfg.n_frames {
            return Err(usage(format!(
                "--dispersal-frame ({}) must be less than --frames ({})",
                cfg.dispersal_frame, cfg.n_frames
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn classifier(
        &self,
        flags: &ClassifierFlags,
        seed: Option<u64>,
        base: &TrainConfig,
    ) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            learning_rate: flags.learning_rate.unwrap_or(base.learning_rate),
            epochs: flags.epochs.unwrap_or(base.epochs),
            l2: flags.l2.unwrap_or(base.l2),
            seed: seed.or(self.seed).unwrap_or(base.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub const MODEL_FILE_SCHEMA_VERSION: u32 = 1;

/// Normalcy model file: the Gaussian statistics plus the threshold and the
/// cube geometry they were trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub gaussian: GaussianModelRecord,
    pub threshold: f64,
    pub percentile: f64,
    pub cube: CubeSpec,
    pub state_dim: usize,
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading model {}", path.display()))?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(CoreError::from)
            .with_context(|| format!("parsing model {}", path.display()))?;
        // validates schema_version and statistics
        file.model()?;
        Ok(file)
    }

    pub fn model(&self) -> Result<GaussianModel> {
        Ok(GaussianModel::from_record(&self.gaussian)?)
    }

    fn pipeline(&self, flags: &PipelineFlags) -> PipelineConfig {
        let p = flags.cube_p.unwrap_or(self.cube.p);
        let q = flags.cube_q.unwrap_or(self.cube.q);
        PipelineConfig {
            cube: CubeSpec {
                p,
                q,
                spatial_stride: flags.spatial_stride.unwrap_or(if flags.cube_p.is_some() {
                    p
                } else {
                    self.cube.spatial_stride
                }),
                temporal_stride: flags.temporal_stride.unwrap_or(if flags.cube_q.is_some() {
                    q
                } else {
                    self.cube.temporal_stride
                }),
            },
            state_dim: flags.state_dim.unwrap_or(self.state_dim),
            percentile: flags.percentile.unwrap_or(self.percentile),
            ..PipelineConfig::default()
        }
    }
}

/// Event classifier file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierFile {
    #[serde(flatten)]
    pub classifier: MaxEntRecord,
    pub cube: CubeSpec,
    pub state_dim: usize,
    pub training: TrainConfig,
    /// Per-feature z-score applied before the classifier: `(x - mean) / scale`.
    pub standardize: Standardizer,
    pub training_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(xs: &[FeatureVector]) -> Self {
        let dim = xs.first().map_or(0, FeatureVector::len);
        let n = xs.len() as f64;
        let mean: Vec<f64> = (0..dim)
            .map(|j| xs.iter().map(|x| x.0[j]).sum::<f64>() / n)
            .collect();
        let scale = (0..dim)
            .map(|j| {
                let var = xs.iter().map(|x| (x.0[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &FeatureVector) -> FeatureVector {
        FeatureVector(
            x.0.iter()
                .zip(self.mean.iter().zip(&self.scale))
                .map(|(v, (m, s))| (v - m) / s)
                .collect(),
        )
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(CoreError::from)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn normal_features(manifest: &DatasetManifest, cfg: &PipelineConfig) -> Result<Vec<FeatureVector>> {
    let mut features = Vec::new();
    for entry in &manifest.entries {
        let ranges = entry.ranges(Label::Normal);
        if ranges.is_empty() {
            continue;
        }
        let seq = load_frame_sequence(manifest.resolve(entry))?;
        features.extend(range_features(&seq, &ranges, cfg, Execution::default())?);
    }
    if features.len() < 2 {
        return Err(CoreError::InvalidInput(format!(
            "manifest provides {} normal cubes; at least 2 are needed (check normal intervals are at least q={} frames long)",
            features.len(),
            cfg.cube.q
        ))
        .into());
    }
    Ok(features)
}

pub fn cmd_synth(synth: &SynthConfig, seed: u64, out_dir: &Path) -> Result<PathBuf> {
    let (seq, _) = generate_synthetic_sequence(synth, seed)?;
    let frames_dir = out_dir.join("frames");
    write_frame_sequence(&seq, &frames_dir)?;
    let manifest = DatasetManifest {
        entries: vec![synthetic_manifest_entry(
            synth,
            "frames",
            format!("synthetic-{seed}"),
        )],
        base_dir: out_dir.to_path_buf(),
    };
    let manifest_path = out_dir.join("manifest.json");
    let mut text = manifest.to_json()?;
    text.push('\n');
    write_atomic(&manifest_path, text.as_bytes())?;
    Ok(manifest_path)
}

pub fn cmd_train(
    manifest_path: &Path,
    cfg: &PipelineConfig,
    model_out: &Path,
) -> Result<ModelFile> {
    cfg.validate()?;
    let manifest = load_manifest(manifest_path)?;
    let features = normal_features(&manifest, cfg)?;
    let (model, threshold) = train_normalcy(&features, cfg.percentile)?;
    let file = ModelFile {
        gaussian: model.to_record(),
        threshold,
        percentile: cfg.percentile,
        cube: cfg.cube,
        state_dim: cfg.state_dim,
    };
    write_json(model_out, &file)?;
    Ok(file)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    pub frames: usize,
    pub anomalous_frames: Vec<usize>,
}

pub fn cmd_score(
    manifest_path: &Path,
    entry: usize,
    model_path: &Path,
    flags: &PipelineFlags,
    scores_out: &Path,
    overlay_dir: Option<&Path>,
) -> Result<ScoreSummary> {
    let file = ModelFile::load(model_path)?;
    let cfg = file.pipeline(flags);
    cfg.validate()?;
    let model = file.model()?;
    let manifest = load_manifest(manifest_path)?;
    let Some(e) = manifest.entries.get(entry) else {
        return Err(CoreError::Manifest(format!(
            "entry {entry} requested but the manifest has {} entries",
            manifest.entries.len()
        ))
        .into());
    };
    let seq = load_frame_sequence(manifest.resolve(e))?;
    let scores = score_sequence(&seq, &model, file.threshold, &cfg, Execution::default())?;

    let mut csv = String::from("frame,score_max,is_anomalous\n");
    for (t, (s, a)) in scores
        .frame_score_max
        .iter()
        .zip(&scores.frame_anomalous)
        .enumerate()
    {
        csv.push_str(&format!("{t},{s},{}\n", u8::from(*a)));
    }
    write_atomic(scores_out, csv.as_bytes())?;

    if let Some(dir) = overlay_dir {
        write_frame_sequence(&overlay_frames(&seq, &scores)?, dir)?;
    }
    Ok(ScoreSummary {
        frames: seq.frame_count(),
        anomalous_frames: scores
            .frame_anomalous
            .iter()
            .enumerate()
            .filter_map(|(t, a)| a.then_some(t))
            .collect(),
    })
}

/// Merges the normal cubes of `manifest_b` into the model at `model_a`.
///
/// The threshold becomes the larger of the old one and the configured
/// percentile of the new batch scored against the merged model.
pub fn cmd_merge(model_a: &Path, manifest_b: &Path, model_out: &Path) -> Result<ModelFile> {
    let a = ModelFile::load(model_a)?;
    let cfg = a.pipeline(&PipelineFlags::default());
    let manifest = load_manifest(manifest_b)?;
    let batch = normal_features(&manifest, &cfg)?;
    let merged = merge_models(&a.model()?, &batch)?;
    let batch_threshold = calibrate_threshold(&merged, &batch, a.percentile)?;
    let file = ModelFile {
        gaussian: merged.to_record(),
        threshold: a.threshold.max(batch_threshold),
        ..a
    };
    write_json(model_out, &file)?;
    Ok(file)
}

pub fn cmd_train_clf(
    manifest_path: &Path,
    cfg: &PipelineConfig,
    out: &Path,
) -> Result<ClassifierFile> {
    cfg.validate()?;
    let manifest = load_manifest(manifest_path)?;
    let mut data = Vec::new();
    for entry in &manifest.entries {
        let seq = load_frame_sequence(manifest.resolve(entry))?;
        let truth = entry.label_track(seq.frame_count())?;
        let (grid, features) = sequence_features(&seq, cfg, Execution::default())?;
        let labels = cube_labels(&grid, &truth)?;
        data.extend(
            features
                .into_iter()
                .zip(labels)
                .map(|(x, l)| (x, l.as_str().to_string())),
        );
    }
    if data.is_empty() {
        return Err(CoreError::InvalidInput("manifest yields no labeled cubes".into()).into());
    }
    let xs: Vec<FeatureVector> = data.iter().map(|(x, _)| x.clone()).collect();
    let standardize = Standardizer::fit(&xs);
    for (x, _) in &mut data {
        *x = standardize.apply(x);
    }
    let labels = vec![
        Label::Normal.as_str().to_string(),
        Label::Abnormal.as_str().to_string(),
    ];
    let model = eventclf::train(labels, &data, &cfg.classifier)?;
    let mut correct = 0;
    for (x, y) in &data {
        if model.predict_label(x)? == y {
            correct += 1;
        }
    }
    let file = ClassifierFile {
        classifier: model.to_record(),
        cube: cfg.cube,
        state_dim: cfg.state_dim,
        training: cfg.classifier.clone(),
        standardize,
        training_accuracy: 100.0 * correct as f64 / data.len() as f64,
    };
    write_json(out, &file)?;
    Ok(file)
}

/// Where `cmd_eval` puts its CSV and JSON reports for `--out path`.
pub fn report_paths(out: &Path) -> (PathBuf, PathBuf) {
    let json = out.with_extension("json");
    if json == out {
        (out.with_extension("csv"), json)
    } else {
        (out.to_path_buf(), json)
    }
}

pub enum EvalSource {
    Synthetic(SynthConfig),
    Manifest(PathBuf),
}

pub fn cmd_eval(
    source: &EvalSource,
    cfg: &PipelineConfig,
    n_runs: usize,
    base_seed: u64,
    out: &Path,
) -> Result<EvalReport> {
    if n_runs == 0 {
        bail!(usage("--runs must be at least 1"));
    }
    let manifest;
    let run_source = match source {
        EvalSource::Synthetic(s) => RunSource::Synthetic(s.clone()),
        EvalSource::Manifest(path) => {
            manifest = load_manifest(path)?;
            RunSource::Manifest(&manifest)
        }
    };
    let report = evaluate_runs(&run_source, cfg, n_runs, base_seed)?;
    let (csv_path, json_path) = report_paths(out);
    write_atomic(&csv_path, report.to_csv().as_bytes())?;
    let mut json = report.to_json()?;
    json.push('\n');
    write_atomic(&json_path, json.as_bytes())?;
    Ok(report)
}

pub const DEFAULT_RUNS: usize = 10;
pub const DEFAULT_SEED: u64 = 0;

/// Executes a parsed command line, printing a one-line summary.
pub fn run(cli: Cli) -> Result<()> {
    let config = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(args) => {
            let synth = config.synth(&args.synth)?;
            let seed = args.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
            let manifest = cmd_synth(&synth, seed, &args.out)?;
            println!("wrote {} frames and {}", synth.n_frames, manifest.display());
        }
        Command::Train(args) => {
            let cfg = config.pipeline(&args.pipeline)?;
            let file = cmd_train(&args.manifest, &cfg, &args.out)?;
            println!(
                "trained on {} cubes (dim {}), threshold {}, wrote {}",
                file.gaussian.m,
                file.gaussian.dim,
                file.threshold,
                args.out.display()
            );
        }
        Command::Score(args) => {
            let summary = cmd_score(
                &args.manifest,
                args.entry,
                &args.model,
                &args.pipeline,
                &args.out,
                args.overlay.as_deref(),
            )?;
            println!(
                "{} of {} frames anomalous, wrote {}",
                summary.anomalous_frames.len(),
                summary.frames,
                args.out.display()
            );
        }
        Command::Merge(args) => {
            let file = cmd_merge(&args.model, &args.manifest, &args.out)?;
            println!(
                "merged model has m = {}, wrote {}",
                file.gaussian.m,
                args.out.display()
            );
        }
        Command::TrainClf(args) => {
            let mut cfg = config.pipeline(&args.pipeline)?;
            cfg.classifier = config.classifier(&args.classifier, args.seed, &cfg.classifier)?;
            let file = cmd_train_clf(&args.manifest, &cfg, &args.out)?;
            println!(
                "training accuracy {:.2}%, wrote {}",
                file.training_accuracy,
                args.out.display()
            );
        }
        Command::Eval(args) => {
            let cfg = config.pipeline(&args.pipeline)?;
            let source = match args.manifest {
                Some(path) => EvalSource::Manifest(path),
                None => EvalSource::Synthetic(config.synth(&args.synth)?),
            };
            let runs = args.runs.or(config.runs).unwrap_or(DEFAULT_RUNS);
            let seed = args.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
            let report = cmd_eval(&source, &cfg, runs, seed, &args.out)?;
            for r in &report.runs {
                println!("run {:>3}  accuracy {:6.2}%", r.run_id, r.accuracy);
            }
            println!("average      {:6.2}%", report.average_accuracy);
        }
    }
    Ok(())
}
