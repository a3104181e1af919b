//! Log-linear (maximum-entropy) event classifier
//!
//! `p(y | x; w) ∝ exp(w · F(x, y))`, trained by full-batch gradient ascent on
//! the conditional log-likelihood. The per-example gradient is
//! `F_j(x, y) − Σ_y' p(y' | x; w) F_j(x, y')`.

use serde::{Deserialize, Serialize};

use crate::dyntex::FeatureVector;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub const CLASSIFIER_SCHEMA_VERSION: u32 = 1;

/// Joint feature function `F(x, y)` over inputs and label indices.
pub trait FeatureMap {
    /// Number of feature functions `J`.
    fn dim(&self) -> usize;
    /// Expected input length.
    fn input_dim(&self) -> usize;
    fn features(&self, x: &[f64], label: usize) -> Vec<f64>;
}

/// One copy of `x` plus a bias per label; only the block of the queried label is non-zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjunctionMap {
    pub input_dim: usize,
    pub label_count: usize,
}

impl ConjunctionMap {
    fn block(&self) -> usize {
        self.input_dim + 1
    }
}

impl FeatureMap for ConjunctionMap {
    fn dim(&self) -> usize {
        self.label_count * self.block()
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn features(&self, x: &[f64], label: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let start = label * self.block();
        out[start..start + self.input_dim].copy_from_slice(x);
        out[start + self.input_dim] = 1.0;
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Recorded for reproducibility; training itself is deterministic.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            l2: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::InvalidConfig("l2 must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntModel<M = ConjunctionMap> {
    labels: Vec<String>,
    w: Vec<f64>,
    map: M,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<M: FeatureMap> MaxEntModel<M> {
    /// Zero-weight model over `labels` (at least two, distinct).
    pub fn new(labels: Vec<String>, map: M) -> Result<Self> {
        let w = vec![0.0; map.dim()];
        Self::with_weights(labels, map, w)
    }

    pub fn with_weights(labels: Vec<String>, map: M, w: Vec<f64>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidConfig("need at least two labels".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidConfig(format!("duplicate label {l:?}")));
            }
        }
        if w.len() != map.dim() {
            return Err(Error::DimensionMismatch {
                expected: map.dim(),
                got: w.len(),
            });
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite weight".into()));
        }
        Ok(Self { labels, w, map })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn feature_map(&self) -> &M {
        &self.map
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    fn check_input(&self, x: &FeatureVector) -> Result<()> {
        if x.len() != self.map.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.map.input_dim(),
                got: x.len(),
            });
        }
        if !x.is_finite() {
            return Err(Error::InvalidInput("non-finite classifier input".into()));
        }
        Ok(())
    }

    fn joint_features(&self, x: &FeatureVector) -> Vec<Vec<f64>> {
        (0..self.labels.len())
            .map(|y| self.map.features(x.as_slice(), y))
            .collect()
    }

    fn probs_from(&self, feats: &[Vec<f64>]) -> Vec<f64> {
        let scores: Vec<f64> = feats.iter().map(|f| dot(&self.w, f)).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }

    /// `p(y | x; w)` for every label, in label order.
    pub fn label_probs(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.probs_from(&self.joint_features(x)))
    }

    pub fn log_prob(&self, x: &FeatureVector, label: usize) -> Result<f64> {
        self.check_input(x)?;
        let feats = self.joint_features(x);
        let scores: Vec<f64> = feats.iter().map(|f| dot(&self.w, f)).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        scores
            .get(label)
            .map(|s| s - lse)
            .ok_or_else(|| Error::UnknownLabel(format!("#{label}")))
    }

    /// `∂ log p(y | x; w) / ∂w`: observed features minus their model expectation.
    pub fn gradient(&self, x: &FeatureVector, label: usize) -> Result<Vec<f64>> {
        if label >= self.labels.len() {
            return Err(Error::UnknownLabel(format!("#{label}")));
        }
        self.check_input(x)?;
        let feats = self.joint_features(x);
        let probs = self.probs_from(&feats);
        let mut grad = feats[label].clone();
        for (f, p) in feats.iter().zip(&probs) {
            for (g, v) in grad.iter_mut().zip(f) {
                *g -= p * v;
            }
        }
        Ok(grad)
    }

    /// Index of the most probable label; ties go to the earliest label.
    pub fn predict(&self, x: &FeatureVector) -> Result<usize> {
        let probs = self.label_probs(x)?;
        let mut best = 0;
        for (i, p) in probs.iter().enumerate().skip(1) {
            if *p > probs[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn predict_label(&self, x: &FeatureVector) -> Result<&str> {
        Ok(&self.labels[self.predict(x)?])
    }

    /// `Σ log p(yᵢ | xᵢ) − (l2 / 2) ‖w‖²`.
    pub fn objective(&self, data: &[(FeatureVector, usize)], l2: f64) -> Result<f64> {
        let mut total = 0.0;
        for (x, y) in data {
            total += self.log_prob(x, *y)?;
        }
        Ok(total - 0.5 * l2 * dot(&self.w, &self.w))
    }

    /// One full-batch ascent step: `w ← w + lr (Σ gradient − l2 w)`.
    pub fn ascent_step(
        &mut self,
        data: &[(FeatureVector, usize)],
        config: &TrainConfig,
        exec: Execution,
    ) -> Result<()>
    where
        M: Sync,
    {
        let grads = par::map(exec, data, |(x, y)| self.gradient(x, *y));
        let mut total = vec![0.0; self.w.len()];
        for g in grads {
            for (t, v) in total.iter_mut().zip(g?) {
                *t += v;
            }
        }
        for (w, g) in self.w.iter_mut().zip(total) {
            *w += config.learning_rate * (g - config.l2 * *w);
        }
        if self.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("training diverged".into()));
        }
        Ok(())
    }
}

/// Resolves string labels to indices in `labels`.
pub fn index_examples(
    labels: &[String],
    data: &[(FeatureVector, String)],
) -> Result<Vec<(FeatureVector, usize)>> {
    data.iter()
        .map(|(x, y)| {
            labels
                .iter()
                .position(|l| l == y)
                .map(|i| (x.clone(), i))
                .ok_or_else(|| Error::UnknownLabel(y.clone()))
        })
        .collect()
}

/// Trains with an arbitrary feature map from `w = 0`.
pub fn train_with_map<M: FeatureMap + Sync>(
    labels: Vec<String>,
    map: M,
    data: &[(FeatureVector, String)],
    config: &TrainConfig,
    exec: Execution,
) -> Result<MaxEntModel<M>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("empty training data".into()));
    }
    let indexed = index_examples(&labels, data)?;
    let mut model = MaxEntModel::new(labels, map)?;
    for (x, _) in &indexed {
        model.check_input(x)?;
    }
    for _ in 0..config.epochs {
        model.ascent_step(&indexed, config, exec)?;
    }
    Ok(model)
}

/// Trains the conjunction-feature classifier over `labels`.
pub fn train(
    labels: Vec<String>,
    data: &[(FeatureVector, String)],
    config: &TrainConfig,
) -> Result<MaxEntModel> {
    let input_dim = data.first().map_or(0, |(x, _)| x.len());
    let map = ConjunctionMap {
        input_dim,
        label_count: labels.len(),
    };
    train_with_map(labels, map, data, config, Execution::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapDescriptor {
    pub kind: String,
    pub dims: usize,
    pub label_count: usize,
}

/// On-disk form of a conjunction-feature classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntRecord {
    pub schema_version: u32,
    pub labels: Vec<String>,
    pub w: Vec<f64>,
    pub feature_map: FeatureMapDescriptor,
}

impl MaxEntModel<ConjunctionMap> {
    pub fn to_record(&self) -> MaxEntRecord {
        MaxEntRecord {
            schema_version: CLASSIFIER_SCHEMA_VERSION,
            labels: self.labels.clone(),
            w: self.w.clone(),
            feature_map: FeatureMapDescriptor {
                kind: "conjunction".into(),
                dims: self.map.input_dim,
                label_count: self.map.label_count,
            },
        }
    }

    pub fn from_record(record: &MaxEntRecord) -> Result<Self> {
        if record.schema_version != CLASSIFIER_SCHEMA_VERSION {
            return Err(Error::Schema {
                expected: CLASSIFIER_SCHEMA_VERSION,
                found: record.schema_version,
            });
        }
        if record.feature_map.kind != "conjunction" {
            return Err(Error::InvalidInput(format!(
                "unknown feature map {:?}",
                record.feature_map.kind
            )));
        }
        if record.feature_map.label_count != record.labels.len() {
            return Err(Error::InvalidInput(
                "label count disagrees with labels".into(),
            ));
        }
        let map = ConjunctionMap {
            input_dim: record.feature_map.dims,
            label_count: record.feature_map.label_count,
        };
        Self::with_weights(record.labels.clone(), map, record.w.clone())
    }
}
