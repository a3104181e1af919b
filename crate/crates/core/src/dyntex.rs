//! Dynamic-texture modeling of a cube as a linear dynamical system
//!
//! ```text
//! x[t+1] = A x[t] + B v[t]
//! y[t]   = C x[t] + y_mean + w[t]
//! ```
//!
//! fitted in closed form by SVD subspace identification, plus the spectral
//! feature map consumed by the normalcy model.

use nalgebra::{DMatrix, DVector, Schur};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cubes::{Cube, CubeOrigin};
use crate::error::{Error, Result};
use crate::linalg::{pseudo_inverse, thin_svd};

/// Below this Frobenius norm a centered cube is treated as static.
const ZERO_VARIANCE_TOL: f64 = 1e-12;
/// Relative cutoff for singular values in the transition least-squares solve.
const PINV_RTOL: f64 = 1e-10;
const MAX_ITER: usize = 10_000;

/// Fitted dynamic-texture parameters of one cube.
#[derive(Debug, Clone, PartialEq)]
pub struct LdsParams {
    /// State transition, `n × n`.
    pub a: DMatrix<f64>,
    /// Observation matrix, `d × n`, orthonormal columns.
    pub c: DMatrix<f64>,
    pub y_mean: DVector<f64>,
    /// Diagonal of `B`: per-dimension innovation standard deviation.
    pub state_noise_scale: DVector<f64>,
    pub obs_noise_var: f64,
    /// Root-mean-square residual of the rank-`n` reconstruction.
    pub recon_error: f64,
}

impl LdsParams {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Parameters of a static block: zero dynamics, zero noise.
    pub fn degenerate(y_mean: DVector<f64>, n: usize) -> Self {
        let d = y_mean.len();
        Self {
            a: DMatrix::zeros(n, n),
            c: DMatrix::identity(d, n),
            y_mean,
            state_noise_scale: DVector::zeros(n),
            obs_noise_var: 0.0,
            recon_error: 0.0,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.recon_error == 0.0
            && self.obs_noise_var == 0.0
            && self.a.iter().all(|v| *v == 0.0)
            && self.state_noise_scale.iter().all(|v| *v == 0.0)
    }
}

/// Fixed-length per-cube descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Length of the feature vector produced for state dimension `n`.
pub fn feature_dim(n: usize) -> usize {
    n + 4
}

fn check_state_dim(n: usize, d: usize, q: usize) -> Result<()> {
    if n == 0 || n > d.min(q.saturating_sub(1)) {
        return Err(Error::InvalidConfig(format!(
            "state dimension {n} must lie in 1..={} (min(d={d}, q-1={}))",
            d.min(q.saturating_sub(1)),
            q.saturating_sub(1)
        )));
    }
    Ok(())
}

/// Fits an `n`-state dynamic texture to `cube`.
///
/// Each of the `q` slices becomes a column of the `d × q` observation matrix.
/// After removing the temporal mean, the top `n` left singular vectors give
/// `C` and `X = Cᵀ Y` the state trajectory. `A` solves
/// `X[:, 1..] ≈ A X[:, ..q-1] + b 1ᵀ` in the least-squares sense; the offset
/// `b` absorbs the shift introduced by mean removal and is not retained.
pub fn fit_lds(cube: &Cube, n: usize) -> Result<LdsParams> {
    let d = cube.p * cube.p;
    let q = cube.q;
    check_state_dim(n, d, q)?;

    let y = DMatrix::from_fn(d, q, |i, t| cube.slice(t)[i]);
    let y_mean = y.column_mean();
    let mut yc = y;
    for mut col in yc.column_iter_mut() {
        col -= &y_mean;
    }
    if yc.norm() <= ZERO_VARIANCE_TOL {
        return Ok(LdsParams::degenerate(y_mean, n));
    }

    let c = thin_svd(&yc).u.columns(0, n).into_owned();
    let x = c.transpose() * &yc;

    let x_prev = x.columns(0, q - 1);
    let x_next = x.columns(1, q - 1).into_owned();
    let mut design = DMatrix::from_element(n + 1, q - 1, 1.0);
    design.rows_mut(0, n).copy_from(&x_prev);
    let coeffs = &x_next * pseudo_inverse(&design, PINV_RTOL);
    let a = coeffs.columns(0, n).into_owned();
    let offset = coeffs.column(n).into_owned();

    let mut innovation = &x_next - &a * x_prev;
    for mut col in innovation.column_iter_mut() {
        col -= &offset;
    }
    let state_noise_scale = DVector::from_iterator(
        n,
        innovation
            .row_iter()
            .map(|row| (row.norm_squared() / (q - 1) as f64).sqrt()),
    );

    let residual = &yc - &c * &x;
    let obs_noise_var = residual.norm_squared() / (d * q) as f64;

    Ok(LdsParams {
        a,
        c,
        y_mean,
        state_noise_scale,
        obs_noise_var,
        recon_error: obs_noise_var.sqrt(),
    })
}

/// Eigenvalue magnitudes of a square matrix, sorted descending.
pub fn eigen_magnitudes(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, MAX_ITER)
        .or_else(|| Schur::try_new(a.clone(), 1e-12 * a.amax().max(1.0), 10 * MAX_ITER))
        .ok_or_else(|| Error::Numeric("Schur decomposition did not converge".into()))?;
    let mut mags: Vec<f64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    mags.sort_by(|x, y| y.total_cmp(x));
    Ok(mags)
}

/// Spectral descriptor: `[|λ|₁ ≥ … ≥ |λ|ₙ, ρ(A), recon_error, mean(state_noise_scale), obs_noise_var]`.
///
/// Eigenvalue magnitudes are invariant to the choice of state basis.
pub fn lds_features(params: &LdsParams) -> Result<FeatureVector> {
    let n = params.state_dim();
    let mags = eigen_magnitudes(&params.a)?;
    let spectral_radius = mags.first().copied().unwrap_or(0.0);
    let mean_noise = if n == 0 {
        0.0
    } else {
        params.state_noise_scale.mean()
    };
    let mut values = mags;
    values.extend([
        spectral_radius,
        params.recon_error,
        mean_noise,
        params.obs_noise_var,
    ]);
    Ok(FeatureVector(values))
}

/// Runs the system forward for `q` frames starting from a state drawn from
/// the innovation distribution.
pub fn simulate_lds(params: &LdsParams, q: usize, seed: u64) -> Result<Cube> {
    simulate_lds_from(params, None, q, seed)
}

/// As [`simulate_lds`], optionally pinning the initial state.
///
/// Output intensities are clamped to `[0, 1]`.
pub fn simulate_lds_from(
    params: &LdsParams,
    initial_state: Option<&DVector<f64>>,
    q: usize,
    seed: u64,
) -> Result<Cube> {
    let n = params.state_dim();
    let d = params.obs_dim();
    if q == 0 {
        return Err(Error::InvalidInput("simulation needs q >= 1".into()));
    }
    if params.c.ncols() != n || params.y_mean.len() != d || params.state_noise_scale.len() != n {
        return Err(Error::InvalidInput(
            "inconsistent LDS parameter shapes".into(),
        ));
    }
    let p = d.isqrt();
    if p * p != d {
        return Err(Error::InvalidInput(format!(
            "observation dimension {d} is not a square patch"
        )));
    }
    if let Some(x0) = initial_state {
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x0.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || -> f64 { StandardNormal.sample(&mut rng) };
    let obs_sd = params.obs_noise_var.max(0.0).sqrt();

    let mut x = match initial_state {
        Some(x0) => x0.clone(),
        None => DVector::from_fn(n, |i, _| params.state_noise_scale[i] * gauss()),
    };
    let mut data = Vec::with_capacity(d * q);
    for t in 0..q {
        if t > 0 {
            let noise = DVector::from_fn(n, |i, _| params.state_noise_scale[i] * gauss());
            x = &params.a * &x + noise;
        }
        let y = &params.c * &x + &params.y_mean;
        data.extend(y.iter().map(|v| {
            let noisy = if obs_sd > 0.0 {
                v + obs_sd * gauss()
            } else {
                *v
            };
            noisy.clamp(0.0, 1.0)
        }));
    }
    Cube::new(CubeOrigin { x: 0, y: 0, t: 0 }, p, q, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Two orthonormal columns over a 4×4 patch.
    fn basis_16() -> DMatrix<f64> {
        let raw = DMatrix::from_fn(16, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0 + j as f64);
        raw.qr().q()
    }

    fn diag_system() -> LdsParams {
        LdsParams {
            a: DMatrix::from_diagonal(&DVector::from_vec(vec![0.9, 0.5])),
            c: basis_16(),
            y_mean: DVector::from_element(16, 0.5),
            state_noise_scale: DVector::zeros(2),
            obs_noise_var: 0.0,
            recon_error: 0.0,
        }
    }

    fn noisy_cube(p: usize, q: usize, seed: u64) -> Cube {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..p * p * q)
            .map(|_| rand::Rng::random::<f64>(&mut rng))
            .collect();
        Cube::new(CubeOrigin { x: 0, y: 0, t: 0 }, p, q, data).unwrap()
    }

    fn assert_orthonormal(c: &DMatrix<f64>) {
        let err = (c.transpose() * c - DMatrix::identity(c.ncols(), c.ncols())).amax();
        assert!(err <= 1e-10, "CᵀC deviates by {err}");
    }

    #[test]
    fn constant_cube_is_degenerate() {
        let cube = Cube::new(CubeOrigin { x: 0, y: 0, t: 0 }, 4, 5, vec![0.5; 80]).unwrap();
        let params = fit_lds(&cube, 2).unwrap();
        assert!(params.is_degenerate());
        assert_eq!(params.recon_error, 0.0);
        assert!(params.a.iter().all(|v| *v == 0.0));
        assert_orthonormal(&params.c);
        let f = lds_features(&params).unwrap();
        assert_eq!(f.0, vec![0.0; 6]);
    }

    #[test]
    fn recovers_diagonal_dynamics() {
        let x0 = DVector::from_vec(vec![0.3, 0.3]);
        let cube = simulate_lds_from(&diag_system(), Some(&x0), 20, 0).unwrap();
        let fitted = fit_lds(&cube, 2).unwrap();
        assert_orthonormal(&fitted.c);
        let mags = eigen_magnitudes(&fitted.a).unwrap();
        assert!((mags[0] - 0.9).abs() < 1e-2, "{mags:?}");
        assert!((mags[1] - 0.5).abs() < 1e-2, "{mags:?}");
    }

    #[test]
    fn fixed_point_simulation() {
        let cube = simulate_lds_from(&diag_system(), Some(&DVector::zeros(2)), 6, 9).unwrap();
        assert!(cube.data.iter().all(|v| *v == 0.5));
    }

    #[test]
    fn simulation_is_deterministic() {
        let mut sys = diag_system();
        sys.state_noise_scale = DVector::from_vec(vec![0.05, 0.02]);
        sys.obs_noise_var = 1e-4;
        let a = simulate_lds(&sys, 12, 42).unwrap();
        let b = simulate_lds(&sys, 12, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn diagonal_feature_entries() {
        let f = lds_features(&diag_system()).unwrap();
        assert_eq!(f.len(), feature_dim(2));
        assert!((f.0[0] - 0.9).abs() < 1e-12);
        assert!((f.0[1] - 0.5).abs() < 1e-12);
        assert!((f.0[2] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn rejects_oversized_state() {
        let cube = noisy_cube(3, 4, 1);
        assert!(fit_lds(&cube, 4).is_err());
        assert!(fit_lds(&cube, 0).is_err());
        assert!(fit_lds(&cube, 3).is_ok());
    }

    #[test]
    fn low_rank_cube_keeps_orthonormal_basis() {
        // two distinct slices repeated: centered rank 1
        let mut data = Vec::new();
        for t in 0..6 {
            data.extend((0..16).map(|i| if (i + t) % 2 == 0 { 0.2 } else { 0.7 }));
        }
        let cube = Cube::new(CubeOrigin { x: 0, y: 0, t: 0 }, 4, 6, data).unwrap();
        let params = fit_lds(&cube, 5).unwrap();
        assert_orthonormal(&params.c);
        assert!(lds_features(&params).unwrap().is_finite());
    }

    #[test]
    fn features_ignore_pixel_ordering() {
        let cube = noisy_cube(4, 8, 5);
        let perm: Vec<usize> = (0..16).map(|i| (i * 5 + 3) % 16).collect();
        let mut shuffled = cube.clone();
        for t in 0..8 {
            for (dst, &src) in perm.iter().enumerate() {
                shuffled.data[t * 16 + dst] = cube.data[t * 16 + src];
            }
        }
        let a = lds_features(&fit_lds(&cube, 4).unwrap()).unwrap();
        let b = lds_features(&fit_lds(&shuffled, 4).unwrap()).unwrap();
        for (u, v) in a.0.iter().zip(&b.0) {
            assert!((u - v).abs() < 1e-9, "{a:?} vs {b:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn eigen_magnitudes_multiply_to_determinant(entries in proptest::collection::vec(-1.0f64..1.0, 25)) {
            let a = DMatrix::from_row_slice(5, 5, &entries);
            let mags = eigen_magnitudes(&a).unwrap();
            let prod: f64 = mags.iter().product();
            prop_assert!((prod - a.determinant().abs()).abs() < 1e-9);
            prop_assert!(mags[0] * 5.0 >= a.trace().abs() - 1e-9);
        }

        #[test]
        fn basis_is_orthonormal(seed in any::<u64>(), n in 1usize..7) {
            let cube = noisy_cube(4, 8, seed);
            let params = fit_lds(&cube, n).unwrap();
            let err = (params.c.transpose() * &params.c - DMatrix::identity(n, n)).amax();
            prop_assert!(err <= 1e-10);
            prop_assert!(params.recon_error >= 0.0);
            prop_assert_eq!(lds_features(&params).unwrap().len(), n + 4);
        }

        #[test]
        fn recon_error_monotone_in_rank(seed in any::<u64>()) {
            let q = 7;
            let cube = noisy_cube(3, q, seed);
            let full = fit_lds(&cube, q - 1).unwrap().recon_error;
            for n in 1..q - 1 {
                prop_assert!(full <= fit_lds(&cube, n).unwrap().recon_error + 1e-12);
            }
        }
    }
}
