//! Baseline differential-entropy estimators: Kozachenko-Leonenko kNN
//! and leave-one-out Gaussian KDE, composed into a total-correlation
//! estimate. Values are in nats (the Gram-based module reports bits;
//! these corroborate trends, not magnitudes).

use ndarray::ArrayView2;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::gram::{KernelSpec, WidthRule};
use crate::{Error, Result};

/// Which baseline to use for [`classic_total_correlation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassicEstimator {
    Knn { k: usize },
    Kde,
}

fn all_rows_identical(data: ArrayView2<f64>) -> bool {
    let first = data.row(0);
    data.rows().into_iter().all(|r| r == first)
}

/// Full pairwise Euclidean distance matrix, with exact duplicates
/// perturbed by a deterministic 1e-10 jitter (the estimator needs
/// log of nonzero distances). The jitter draws from a fixed stream so
/// identical inputs give identical outputs.
fn distances_with_jitter(data: ArrayView2<f64>) -> Result<Vec<Vec<f64>>> {
    let n = data.nrows();
    let mut points: Vec<Vec<f64>> = data.rows().into_iter().map(|r| r.to_vec()).collect();
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let has_tie = |pts: &[Vec<f64>]| {
        (0..n).any(|i| ((i + 1)..n).any(|j| dist(&pts[i], &pts[j]) == 0.0))
    };
    if has_tie(&points) {
        let mut rng = crate::rng::stream(0x6a_17_7e_12, crate::rng::Stream::CloudJitter);
        for p in points.iter_mut() {
            for v in p.iter_mut() {
                *v += 1e-10 * crate::rng::normal(&mut rng);
            }
        }
        if has_tie(&points) {
            return Err(Error::InvalidArgument(
                "duplicate points persist after 1e-10 jitter".into(),
            ));
        }
    }
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist(&points[i], &points[j]);
            rows[i][j] = d;
            rows[j][i] = d;
        }
    }
    Ok(rows)
}

/// Kozachenko-Leonenko estimate
/// `H = ψ(N) − ψ(k) + log c_D + (D/N) Σ log ε_i`,
/// with `ε_i` the distance from point i to its k-th nearest neighbor
/// and `c_D` the volume of the unit D-ball.
pub fn knn_entropy(data: ArrayView2<f64>, k: usize) -> Result<f64> {
    let (n, d) = (data.nrows(), data.ncols());
    if k < 1 || n <= k {
        return Err(Error::InvalidArgument(format!(
            "knn entropy needs N > k >= 1, got N={n}, k={k}"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("knn entropy input".into()));
    }
    let dists = distances_with_jitter(data)?;
    let mut log_eps_sum = 0.0;
    for (i, row) in dists.iter().enumerate() {
        let mut others: Vec<f64> = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .collect();
        let (_, kth, _) = others.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
        let eps = *kth;
        if eps <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "zero k-th neighbor distance at point {i} after jitter"
            )));
        }
        log_eps_sum += eps.ln();
    }
    let df = d as f64;
    let log_unit_ball = (df / 2.0) * std::f64::consts::PI.ln() - ln_gamma(df / 2.0 + 1.0);
    Ok(digamma(n as f64) - digamma(k as f64) + log_unit_ball + (df / n as f64) * log_eps_sum)
}

/// Resubstitution estimate `H = −(1/N) Σ log p̂(x_i)` with a
/// leave-one-out isotropic Gaussian KDE. The bandwidth rule defaults to
/// Silverman in callers; a fixed width is accepted for testing.
pub fn kde_entropy(data: ArrayView2<f64>, bandwidth: &KernelSpec) -> Result<f64> {
    let (n, d) = (data.nrows(), data.ncols());
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "kde entropy needs at least 2 points, got {n}"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kde entropy input".into()));
    }
    if all_rows_identical(data) {
        return Err(Error::InvalidArgument(
            "kde entropy: degenerate data (all points identical)".into(),
        ));
    }
    let h = bandwidth.resolve(data)?;
    let df = d as f64;
    let log_norm = -(df / 2.0) * (2.0 * std::f64::consts::PI).ln() - df * h.ln();
    let inv2h2 = 1.0 / (2.0 * h * h);
    let mut acc = 0.0;
    for i in 0..n {
        let xi = data.row(i);
        // log of the mean kernel over the N-1 other points, via
        // log-sum-exp for stability far in the tails.
        let mut max_e = f64::NEG_INFINITY;
        let mut exps = Vec::with_capacity(n - 1);
        for j in 0..n {
            if j == i {
                continue;
            }
            let d2: f64 = xi
                .iter()
                .zip(data.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let e = -d2 * inv2h2;
            max_e = max_e.max(e);
            exps.push(e);
        }
        let sum: f64 = exps.iter().map(|e| (e - max_e).exp()).sum();
        let log_p = log_norm + max_e + sum.ln() - ((n - 1) as f64).ln();
        acc += log_p;
    }
    Ok(-acc / n as f64)
}

/// `Σ_j H(z_j) − H(z)` with the chosen baseline estimator, in nats.
pub fn classic_total_correlation(z: ArrayView2<f64>, estimator: ClassicEstimator) -> Result<f64> {
    let d = z.ncols();
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "total correlation needs at least 2 dimensions, got {d}"
        )));
    }
    let entropy_of = |view: ArrayView2<f64>| -> Result<f64> {
        match estimator {
            ClassicEstimator::Knn { k } => knn_entropy(view, k),
            ClassicEstimator::Kde => kde_entropy(view, &KernelSpec { rule: WidthRule::Silverman }),
        }
    };
    let mut marginal_sum = 0.0;
    for j in 0..d {
        marginal_sum += entropy_of(z.slice(ndarray::s![.., j..j + 1]))?;
    }
    Ok(marginal_sum - entropy_of(z)?)
}
