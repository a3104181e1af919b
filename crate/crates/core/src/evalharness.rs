//! Frame-level accuracy over repeated runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_io::{
    generate_synthetic_sequence, load_frame_sequence, DatasetManifest, FrameSequence, Label,
    LabelTrack, SynthConfig,
};
use crate::par::{self, Execution};
use crate::pipeline::{range_features, score_sequence, train_normalcy, PipelineConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Frame counts with `Abnormal` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: usize,
    /// Percent in `[0, 100]`.
    pub accuracy: f64,
    pub n_frames_evaluated: usize,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub runs: Vec<RunResult>,
    pub average_accuracy: f64,
}

pub fn compute_accuracy(predicted: &LabelTrack, truth: &LabelTrack) -> Result<(f64, Confusion)> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput(
            "cannot score empty label tracks".into(),
        ));
    }
    let mut c = Confusion::default();
    for (p, t) in predicted.labels().iter().zip(truth.labels()) {
        match (p, t) {
            (Label::Abnormal, Label::Abnormal) => c.tp += 1,
            (Label::Abnormal, Label::Normal) => c.fp += 1,
            (Label::Normal, Label::Normal) => c.tn += 1,
            (Label::Normal, Label::Abnormal) => c.fn_ += 1,
        }
    }
    Ok((100.0 * (c.tp + c.tn) as f64 / truth.len() as f64, c))
}

/// Arithmetic mean of per-run accuracies.
pub fn average_accuracy(accuracies: &[f64]) -> Result<f64> {
    if accuracies.is_empty() {
        return Err(Error::InvalidInput("no runs to average".into()));
    }
    Ok(accuracies.iter().sum::<f64>() / accuracies.len() as f64)
}

impl EvalReport {
    pub fn from_runs(runs: Vec<RunResult>) -> Result<Self> {
        let accs: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            average_accuracy: average_accuracy(&accs)?,
            runs,
        })
    }

    /// `run,accuracy,tp,fp,tn,fn` rows followed by `average,<value>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("run,accuracy,tp,fp,tn,fn\n");
        for r in &self.runs {
            let c = r.confusion;
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.run_id, r.accuracy, c.tp, c.fp, c.tn, c.fn_
            ));
        }
        out.push_str(&format!("average,{}\n", self.average_accuracy));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Where each run's labeled sequence comes from.
#[derive(Debug, Clone)]
pub enum RunSource<'a> {
    /// Run `r` renders the generator with seed `base_seed + r`.
    Synthetic(SynthConfig),
    /// Run `r` uses manifest entry `r`.
    Manifest(&'a DatasetManifest),
}

/// Trains on the leading normal frames of `seq`, scores every frame, and compares with `truth`.
pub fn run_on_sequence(
    run_id: usize,
    seq: &FrameSequence,
    truth: &LabelTrack,
    config: &PipelineConfig,
    exec: Execution,
) -> Result<RunResult> {
    if truth.len() != seq.frame_count() {
        return Err(Error::DimensionMismatch {
            expected: seq.frame_count(),
            got: truth.len(),
        });
    }
    let prefix = truth.normal_prefix_len();
    let features = range_features(seq, &[(0, prefix)], config, exec)?;
    if features.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "run {run_id}: no normal-labeled training frames ({prefix} leading normal frames, cube depth {})",
            config.cube.q
        )));
    }
    let (model, threshold) = train_normalcy(&features, config.percentile)?;
    let scores = score_sequence(seq, &model, threshold, config, exec)?;
    let (accuracy, confusion) = compute_accuracy(&scores.predictions(), truth)?;
    Ok(RunResult {
        run_id,
        accuracy,
        n_frames_evaluated: truth.len(),
        confusion,
    })
}

pub fn evaluate_runs(
    source: &RunSource<'_>,
    config: &PipelineConfig,
    n_runs: usize,
    base_seed: u64,
) -> Result<EvalReport> {
    evaluate_runs_with(source, config, n_runs, base_seed, Execution::default())
}

pub fn evaluate_runs_with(
    source: &RunSource<'_>,
    config: &PipelineConfig,
    n_runs: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<EvalReport> {
    config.validate()?;
    if n_runs == 0 {
        return Err(Error::InvalidConfig("n_runs must be at least 1".into()));
    }
    if let RunSource::Manifest(m) = source {
        if n_runs > m.entries.len() {
            return Err(Error::InvalidConfig(format!(
                "{n_runs} runs requested but the manifest has {} entries",
                m.entries.len()
            )));
        }
    }
    let runs = par::map_range(exec, n_runs, |r| -> Result<RunResult> {
        let (seq, truth) = match source {
            RunSource::Synthetic(synth) => {
                generate_synthetic_sequence(synth, base_seed.wrapping_add(r as u64))?
            }
            RunSource::Manifest(manifest) => {
                let entry = &manifest.entries[r];
                let seq = load_frame_sequence(manifest.resolve(entry))?;
                let truth = entry.label_track(seq.frame_count())?;
                (seq, truth)
            }
        };
        run_on_sequence(r, &seq, &truth, config, exec)
    });
    EvalReport::from_runs(runs.into_iter().collect::<Result<_>>()?)
}
