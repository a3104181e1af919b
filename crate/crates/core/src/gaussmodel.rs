//! Gaussian normalcy model over cube features: fitting, Mahalanobis scoring,
//! threshold decisions, and batch merging.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::dyntex::FeatureVector;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Ridge added to every fitted covariance.
pub const COVARIANCE_RIDGE: f64 = 1e-6;
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Mean, covariance and sample count of the normal-activity features.
///
/// `per_feature_sigma` keeps the population (1/L) standard deviation of each
/// component; `sigma` is the sample (1/(L−1)) covariance used for scoring.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    per_feature_sigma: DVector<f64>,
    m: usize,
    factor: Cholesky<f64, Dyn>,
}

impl PartialEq for GaussianModel {
    fn eq(&self, other: &Self) -> bool {
        self.mu == other.mu
            && self.sigma == other.sigma
            && self.per_feature_sigma == other.per_feature_sigma
            && self.m == other.m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyDecision {
    pub score: f64,
    pub threshold: f64,
    pub is_anomalous: bool,
}

fn to_matrix(rows: &[FeatureVector]) -> Result<DMatrix<f64>> {
    let dim = rows.first().map_or(0, FeatureVector::len);
    for row in rows {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        if !row.is_finite() {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), dim, |i, j| rows[i].0[j]))
}

/// Mirrors the upper triangle so the matrix is exactly symmetric.
fn symmetrize(m: &mut DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            m[(j, i)] = m[(i, j)];
        }
    }
}

impl GaussianModel {
    /// Assembles a model from its statistics, checking shape and factorizability.
    pub fn from_parts(
        mu: DVector<f64>,
        sigma: DMatrix<f64>,
        per_feature_sigma: DVector<f64>,
        m: usize,
    ) -> Result<Self> {
        let dim = mu.len();
        if dim == 0 {
            return Err(Error::InvalidInput(
                "model dimension must be positive".into(),
            ));
        }
        if sigma.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: sigma.nrows(),
            });
        }
        if per_feature_sigma.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: per_feature_sigma.len(),
            });
        }
        if m == 0 {
            return Err(Error::InvalidInput(
                "sample count must be at least 1".into(),
            ));
        }
        if mu
            .iter()
            .chain(sigma.iter())
            .chain(per_feature_sigma.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Numeric("non-finite model statistic".into()));
        }
        if per_feature_sigma.iter().any(|s| *s < 0.0) {
            return Err(Error::InvalidInput("negative per-feature sigma".into()));
        }
        let asym = (&sigma - sigma.transpose()).amax();
        if asym > 1e-12 {
            return Err(Error::Numeric(format!("covariance asymmetric by {asym:e}")));
        }
        let factor = Cholesky::new(sigma.clone())
            .ok_or_else(|| Error::Numeric("covariance is not positive definite".into()))?;
        Ok(Self {
            mu,
            sigma,
            per_feature_sigma,
            m,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn per_feature_sigma(&self) -> &DVector<f64> {
        &self.per_feature_sigma
    }

    pub fn sample_count(&self) -> usize {
        self.m
    }

    pub fn to_record(&self) -> GaussianModelRecord {
        let dim = self.dim();
        GaussianModelRecord {
            schema_version: MODEL_SCHEMA_VERSION,
            dim,
            m: self.m,
            mu: self.mu.iter().copied().collect(),
            sigma: (0..dim)
                .flat_map(|i| (0..dim).map(move |j| (i, j)))
                .map(|(i, j)| self.sigma[(i, j)])
                .collect(),
            per_feature_sigma: self.per_feature_sigma.iter().copied().collect(),
        }
    }

    pub fn from_record(record: &GaussianModelRecord) -> Result<Self> {
        if record.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Schema {
                expected: MODEL_SCHEMA_VERSION,
                found: record.schema_version,
            });
        }
        let dim = record.dim;
        for (name, len, want) in [
            ("mu", record.mu.len(), dim),
            ("sigma", record.sigma.len(), dim * dim),
            ("per_feature_sigma", record.per_feature_sigma.len(), dim),
        ] {
            if len != want {
                return Err(Error::InvalidInput(format!(
                    "model field {name} has {len} values, expected {want}"
                )));
            }
        }
        Self::from_parts(
            DVector::from_column_slice(&record.mu),
            DMatrix::from_row_slice(dim, dim, &record.sigma),
            DVector::from_column_slice(&record.per_feature_sigma),
            record.m,
        )
    }
}

/// On-disk form of a [`GaussianModel`]; `sigma` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianModelRecord {
    pub schema_version: u32,
    pub dim: usize,
    pub m: usize,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub per_feature_sigma: Vec<f64>,
}

/// Fits the normal model to `L ≥ 2` feature rows.
pub fn fit_gaussian(features: &[FeatureVector]) -> Result<GaussianModel> {
    let l = features.len();
    if l < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 feature vectors, got {l}"
        )));
    }
    let data = to_matrix(features)?;
    if data.ncols() == 0 {
        return Err(Error::InvalidInput(
            "feature dimension must be positive".into(),
        ));
    }
    let mu = data.row_mean().transpose();
    let mut centered = data;
    for mut row in centered.row_iter_mut() {
        row -= mu.transpose();
    }
    let per_feature_sigma = centered
        .column_iter()
        .map(|col| (col.norm_squared() / l as f64).sqrt())
        .collect::<Vec<_>>();
    let mut sigma = centered.transpose() * &centered / (l - 1) as f64;
    symmetrize(&mut sigma);
    for i in 0..sigma.nrows() {
        sigma[(i, i)] += COVARIANCE_RIDGE;
    }
    GaussianModel::from_parts(mu, sigma, DVector::from_vec(per_feature_sigma), l)
}

/// Squared Mahalanobis distance `(x − μ)ᵀ Σ⁻¹ (x − μ)` via the Cholesky factor.
pub fn mahalanobis(model: &GaussianModel, x: &FeatureVector) -> Result<f64> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    let diff = DVector::from_column_slice(x.as_slice()) - &model.mu;
    let z = model
        .factor
        .l_dirty()
        .solve_lower_triangular(&diff)
        .ok_or_else(|| Error::Numeric("singular covariance factor".into()))?;
    Ok(z.norm_squared())
}

pub fn mahalanobis_batch(
    model: &GaussianModel,
    xs: &[FeatureVector],
    exec: Execution,
) -> Result<Vec<f64>> {
    par::map(exec, xs, |x| mahalanobis(model, x))
        .into_iter()
        .collect()
}

/// Anomalous iff the score strictly exceeds `threshold`.
pub fn decide(model: &GaussianModel, x: &FeatureVector, threshold: f64) -> Result<AnomalyDecision> {
    let score = mahalanobis(model, x)?;
    Ok(AnomalyDecision {
        score,
        threshold,
        is_anomalous: score > threshold,
    })
}

/// Combines sample statistics of two batches:
///
/// ```text
/// μ_c = m μ_a / (m + n) + n μ_b / (m + n)
/// Σ_c = ((m − 1) Σ_a + n Σ_b) / (m + n − 1)
/// ```
///
/// The covariance update is the approximate pooled form, not the exact one.
pub fn merge_statistics(
    mu_a: &DVector<f64>,
    sigma_a: &DMatrix<f64>,
    m: usize,
    mu_b: &DVector<f64>,
    sigma_b: &DMatrix<f64>,
    n: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let (mf, nf) = (m as f64, n as f64);
    let total = mf + nf;
    let mu = mu_a * (mf / total) + mu_b * (nf / total);
    let sigma = (sigma_a * (mf - 1.0) + sigma_b * nf) / (total - 1.0);
    (mu, sigma)
}

/// Folds a new batch of `n ≥ 2` feature rows into `a`.
pub fn merge_models(a: &GaussianModel, b_features: &[FeatureVector]) -> Result<GaussianModel> {
    if b_features.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "merge batch needs at least 2 rows, got {}",
            b_features.len()
        )));
    }
    if let Some(bad) = b_features.iter().find(|f| f.len() != a.dim()) {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: bad.len(),
        });
    }
    let b = fit_gaussian(b_features)?;
    let (mu, mut sigma) = merge_statistics(&a.mu, &a.sigma, a.m, &b.mu, &b.sigma, b.m);
    symmetrize(&mut sigma);
    let per_feature_sigma = sigma.diagonal().map(|v| v.max(0.0).sqrt());
    GaussianModel::from_parts(mu, sigma, per_feature_sigma, a.m + b.m)
}

/// Percentile of `values` with linear interpolation between order statistics.
pub fn percentile(values: &[f64], pct: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("percentile of an empty set".into()));
    }
    if !(pct > 0.0 && pct <= 100.0) {
        return Err(Error::InvalidConfig(format!(
            "percentile {pct} outside (0, 100]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Threshold at the given percentile of the training scores.
pub fn calibrate_threshold(
    model: &GaussianModel,
    training_features: &[FeatureVector],
    pct: f64,
) -> Result<f64> {
    if training_features.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let scores = mahalanobis_batch(model, training_features, Execution::default())?;
    percentile(&scores, pct)
}
