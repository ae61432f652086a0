//! Small dense least squares via Householder QR.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Relative threshold on a column's orthogonal remainder below which the
/// design is treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LeastSquares {
    /// Intercept first (when requested), then one coefficient per regressor.
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct RankDeficient {
    /// Index into the regressor list (excluding the intercept), if attributable.
    pub column: Option<usize>,
}

/// Fits `y ~ [1] + regressors` by ordinary least squares.
pub(crate) fn least_squares(regressors: &[&[f64]], y: &[f64], intercept: bool) -> Result<LeastSquares, RankDeficient> {
    let n = y.len();
    let offset = usize::from(intercept);
    let p = regressors.len() + offset;
    if p > n {
        return Err(RankDeficient { column: None });
    }
    // Column-major copy of the design matrix.
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(p);
    if intercept {
        a.push(vec![1.0; n]);
    }
    for r in regressors {
        debug_assert_eq!(r.len(), n);
        a.push(r.to_vec());
    }
    let norms: Vec<f64> = a.iter().map(|c| norm(c)).collect();
    let mut qty = y.to_vec();

    for k in 0..p {
        let alpha = norm(&a[k][k..]);
        if alpha <= RANK_TOL * norms[k].max(f64::MIN_POSITIVE) {
            return Err(RankDeficient { column: k.checked_sub(offset) });
        }
        let alpha = if a[k][k] > 0.0 { -alpha } else { alpha };
        // v = x - alpha e1, stored in place of column k below the diagonal.
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(k + 1) {
                reflect(&v, vnorm2, &mut col[k..]);
            }
            reflect(&v, vnorm2, &mut qty[k..]);
        }
        a[k][k] = alpha;
        for x in a[k][k + 1..].iter_mut() {
            *x = 0.0;
        }
    }

    let mut beta = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = qty[k];
        for j in k + 1..p {
            s -= a[j][k] * beta[j];
        }
        beta[k] = s / a[k][k];
    }

    let mut residuals = y.to_vec();
    for (i, r) in residuals.iter_mut().enumerate() {
        let mut fit = if intercept { beta[0] } else { 0.0 };
        for (j, reg) in regressors.iter().enumerate() {
            fit += beta[j + offset] * reg[i];
        }
        *r -= fit;
    }
    let rss = residuals.iter().map(|r| r * r).sum();
    Ok(LeastSquares { coefficients: beta, residuals, rss })
}

fn norm(x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
    if scale == 0.0 {
        return 0.0;
    }
    let s: f64 = x.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * math::sqrt(s)
}

fn reflect(v: &[f64], vnorm2: f64, x: &mut [f64]) {
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let f = 2.0 * dot / vnorm2;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= f * vi;
    }
}
