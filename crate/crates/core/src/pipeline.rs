//! Glue between the modules: cube features for whole sequences, training the
//! normalcy model, and frame-level scoring.

use serde::{Deserialize, Serialize};

use crate::cubes::{extract_cubes_with, CubeGrid, CubeSpec};
use crate::dyntex::{feature_dim, fit_lds, lds_features, FeatureVector};
use crate::error::{Error, Result};
use crate::eventclf::TrainConfig;
use crate::frame_io::{FrameSequence, Label, LabelTrack};
use crate::gaussmodel::{calibrate_threshold, fit_gaussian, mahalanobis_batch, GaussianModel};
use crate::par::{self, Execution};

pub const DEFAULT_PERCENTILE: f64 = 100.0;
pub const DEFAULT_STATE_DIM: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub cube: CubeSpec,
    pub state_dim: usize,
    /// Percentile of training scores used as the anomaly threshold.
    pub percentile: f64,
    pub classifier: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            // q = 8 so that the default 5-state model fits (n ≤ q − 1)
            cube: CubeSpec::tiling(8, 8),
            state_dim: DEFAULT_STATE_DIM,
            percentile: DEFAULT_PERCENTILE,
            classifier: TrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.cube.validate()?;
        let n = self.state_dim;
        if n == 0 || n + 1 > self.cube.q || n > self.cube.slice_len() {
            return Err(Error::InvalidConfig(format!(
                "state dimension {n} must satisfy 1 <= n <= q-1 = {} and n <= p^2 = {}",
                self.cube.q - 1,
                self.cube.slice_len()
            )));
        }
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(Error::InvalidConfig(format!(
                "percentile {} outside (0, 100]",
                self.percentile
            )));
        }
        self.classifier.validate()
    }

    pub fn feature_dim(&self) -> usize {
        feature_dim(self.state_dim)
    }
}

/// Fits a dynamic texture to every cube of `grid` and returns the features in grid order.
pub fn cube_features(
    grid: &CubeGrid,
    state_dim: usize,
    exec: Execution,
) -> Result<Vec<FeatureVector>> {
    par::map(exec, &grid.cubes, |cube| {
        fit_lds(cube, state_dim).and_then(|p| lds_features(&p))
    })
    .into_iter()
    .collect()
}

pub fn sequence_features(
    seq: &FrameSequence,
    config: &PipelineConfig,
    exec: Execution,
) -> Result<(CubeGrid, Vec<FeatureVector>)> {
    let grid = extract_cubes_with(seq, &config.cube, exec)?;
    let features = cube_features(&grid, config.state_dim, exec)?;
    Ok((grid, features))
}

/// Features of every cube lying wholly inside one of the frame `ranges`.
///
/// Each range is tiled independently; ranges shorter than `q` contribute nothing.
pub fn range_features(
    seq: &FrameSequence,
    ranges: &[(usize, usize)],
    config: &PipelineConfig,
    exec: Execution,
) -> Result<Vec<FeatureVector>> {
    let mut out = Vec::new();
    for &(start, end) in ranges {
        let end = end.min(seq.frame_count());
        if end <= start || end - start < config.cube.q {
            continue;
        }
        let sub = seq.sub_sequence(start, end)?;
        out.extend(sequence_features(&sub, config, exec)?.1);
    }
    Ok(out)
}

/// Fits the normalcy model and calibrates its threshold on the same features.
pub fn train_normalcy(features: &[FeatureVector], pct: f64) -> Result<(GaussianModel, f64)> {
    if features.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 normal training cubes, got {}",
            features.len()
        )));
    }
    let model = fit_gaussian(features)?;
    let threshold = calibrate_threshold(&model, features, pct)?;
    Ok((model, threshold))
}

/// Per-cube and per-frame outcome of scoring a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceScores {
    pub grid: CubeGrid,
    pub threshold: f64,
    pub cube_scores: Vec<f64>,
    /// Largest score of any cube covering the frame; 0 for uncovered frames.
    pub frame_score_max: Vec<f64>,
    /// OR of the decisions of the cubes covering the frame.
    pub frame_anomalous: Vec<bool>,
}

impl SequenceScores {
    pub fn cube_anomalous(&self, idx: usize) -> bool {
        self.cube_scores[idx] > self.threshold
    }

    pub fn predictions(&self) -> LabelTrack {
        LabelTrack(
            self.frame_anomalous
                .iter()
                .map(|&a| if a { Label::Abnormal } else { Label::Normal })
                .collect(),
        )
    }

    pub fn anomalous_frame_count(&self) -> usize {
        self.frame_anomalous.iter().filter(|a| **a).count()
    }
}

pub fn score_sequence(
    seq: &FrameSequence,
    model: &GaussianModel,
    threshold: f64,
    config: &PipelineConfig,
    exec: Execution,
) -> Result<SequenceScores> {
    if model.dim() != config.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: config.feature_dim(),
            got: model.dim(),
        });
    }
    let (grid, features) = sequence_features(seq, config, exec)?;
    let cube_scores = mahalanobis_batch(model, &features, exec)?;

    let mut frame_score_max = vec![0.0f64; seq.frame_count()];
    let mut frame_anomalous = vec![false; seq.frame_count()];
    for (cube, &score) in grid.cubes.iter().zip(&cube_scores) {
        for t in cube.frame_range() {
            frame_score_max[t] = frame_score_max[t].max(score);
            frame_anomalous[t] |= score > threshold;
        }
    }
    Ok(SequenceScores {
        grid,
        threshold,
        cube_scores,
        frame_score_max,
        frame_anomalous,
    })
}

/// Copy of `seq` with every anomalous cube footprint set to full intensity.
pub fn overlay_frames(seq: &FrameSequence, scores: &SequenceScores) -> Result<FrameSequence> {
    let mut frames = seq.frames().to_vec();
    let width = seq.width();
    for (idx, cube) in scores.grid.cubes.iter().enumerate() {
        if !scores.cube_anomalous(idx) {
            continue;
        }
        for t in cube.frame_range() {
            for y in cube.origin.y..cube.origin.y + cube.p {
                let row = y * width;
                frames[t][row + cube.origin.x..row + cube.origin.x + cube.p].fill(1.0);
            }
        }
    }
    FrameSequence::new(seq.width(), seq.height(), frames)
}

/// Label per cube: abnormal if any frame it spans is abnormal.
pub fn cube_labels(grid: &CubeGrid, truth: &LabelTrack) -> Result<Vec<Label>> {
    grid.cubes
        .iter()
        .map(|cube| {
            let labels =
                truth
                    .labels()
                    .get(cube.frame_range())
                    .ok_or_else(|| Error::DimensionMismatch {
                        expected: cube.origin.t + cube.q,
                        got: truth.len(),
                    })?;
            Ok(if labels.contains(&Label::Abnormal) {
                Label::Abnormal
            } else {
                Label::Normal
            })
        })
        .collect()
}
