//! Dense kernels the fitting code needs beyond what nalgebra provides reliably.

use nalgebra::DMatrix;

const MAX_SWEEPS: usize = 100;

/// Thin singular value decomposition `M = U diag(s) Vᵀ` with `k = min(rows, cols)`.
///
/// `s` is sorted descending. `U` always has `k` orthonormal columns: columns
/// belonging to zero singular values are completed to an orthonormal basis.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn thin_svd(m: &DMatrix<f64>) -> ThinSvd {
    if m.nrows() < m.ncols() {
        let t = thin_svd(&m.transpose());
        // v of the transpose is already orthonormal; u may need completion
        let mut v = t.v;
        complete_basis(&mut v, &t.s);
        return ThinSvd {
            u: v,
            s: t.s,
            v: t.u,
        };
    }
    let n = m.ncols();
    let mut work = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    // columns at rounding-noise level never converge; leave them alone
    let negligible = (f64::EPSILON * m.norm()).powi(2) * n as f64;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = work.column(i).norm_squared();
                let beta = work.column(j).norm_squared();
                let gamma = work.column(i).dot(&work.column(j));
                if alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut work, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| work.column(j).norm()).collect();
    let scale = norms.iter().copied().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut u = DMatrix::zeros(m.nrows(), n);
    let mut vs = DMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        let negligible = sigma <= scale * 1e-13 || sigma == 0.0;
        s.push(if negligible { 0.0 } else { sigma });
        if !negligible {
            u.set_column(k, &(work.column(j) / sigma));
        }
        vs.set_column(k, &v.column(j));
    }
    complete_basis(&mut u, &s);
    ThinSvd { u, s, v: vs }
}

fn rotate(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (a, b) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = c * a - s * b;
        m[(r, j)] = s * a + c * b;
    }
}

/// Fills the columns of `u` whose singular value is zero with unit vectors
/// orthogonal to every other column.
fn complete_basis(u: &mut DMatrix<f64>, s: &[f64]) {
    let rows = u.nrows();
    for k in 0..u.ncols() {
        if s.get(k).is_some_and(|v| *v > 0.0) {
            continue;
        }
        let mut best: Option<(f64, nalgebra::DVector<f64>)> = None;
        for e in 0..rows {
            let mut cand = nalgebra::DVector::zeros(rows);
            cand[e] = 1.0;
            // two Gram–Schmidt passes against the established columns
            for _ in 0..2 {
                for j in 0..u.ncols() {
                    if j == k || (j > k && !s.get(j).is_some_and(|v| *v > 0.0)) {
                        continue;
                    }
                    let proj = u.column(j).dot(&cand);
                    cand -= u.column(j) * proj;
                }
            }
            let norm = cand.norm();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, cand));
            }
            if norm > 0.5 {
                break;
            }
        }
        let (norm, cand) = best.expect("at least one row");
        u.set_column(k, &(cand / norm));
    }
}

/// Moore–Penrose pseudo-inverse; singular values below `rtol · s_max` are dropped.
pub fn pseudo_inverse(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let svd = thin_svd(m);
    let cutoff = svd.s.first().copied().unwrap_or(0.0) * rtol;
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.s.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += svd.v.column(k) * svd.u.column(k).transpose() / s;
        }
    }
    out
}
