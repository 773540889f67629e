//! Disentanglement and time-series metrics: the mutual information gap
//! (MIG) against ground-truth factors, Pearson correlation, and
//! fitting/compression phase detection on logged series.

use ndarray::ArrayView2;

use crate::{Error, Result};

/// MIG score plus any factors that had to be skipped.
#[derive(Clone, Debug)]
pub struct MigReport {
    /// Mean over scorable factors of the normalized top-two MI gap.
    pub score: f64,
    /// Human-readable notes for skipped (constant) factors.
    pub warnings: Vec<String>,
}

/// Equal-count (rank) binning: the i-th order statistic lands in bin
/// `rank * bins / N`. Ties resolve by original index through the
/// stable sort, so the discretization is deterministic and invariant
/// under strictly monotone transforms.
fn rank_bins(col: &[f64], bins: usize) -> Vec<usize> {
    let n = col.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap().then(a.cmp(&b)));
    let mut out = vec![0usize; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank * bins / n;
    }
    out
}

/// Discrete entropy of integer labels, in nats.
fn entropy_disc(labels: &[usize]) -> f64 {
    let m = labels.iter().max().map_or(0, |&x| x + 1);
    let mut counts = vec![0.0f64; m];
    for &l in labels {
        counts[l] += 1.0;
    }
    let n = labels.len() as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| (c / n) * (c / n).ln())
        .sum::<f64>()
}

/// Discrete mutual information between two integer label columns, nats.
fn mi_disc(a: &[usize], b: &[usize]) -> f64 {
    let (ma, mb) = (
        a.iter().max().map_or(0, |&x| x + 1),
        b.iter().max().map_or(0, |&x| x + 1),
    );
    let n = a.len() as f64;
    let mut joint = vec![vec![0.0f64; mb]; ma];
    for (&x, &y) in a.iter().zip(b) {
        joint[x][y] += 1.0 / n;
    }
    let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let pb: Vec<f64> = (0..mb).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
    let mut mi = 0.0;
    for (i, row) in joint.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (pa[i] * pb[j])).ln();
            }
        }
    }
    mi
}

/// Mutual information gap over ground-truth factors.
///
/// Each latent column is rank-binned into `bins` equal-count bins; for
/// every factor the two latents with the highest discrete MI are found
/// (ties broken toward the lower latent index) and the normalized gap
/// `(I_best − I_runner_up) / H(factor)` contributes to the mean.
/// Constant factors are skipped with a warning; constant latents get
/// MI 0 and simply never win.
pub fn mig(latents: ArrayView2<f64>, factors: ArrayView2<usize>, bins: usize) -> Result<MigReport> {
    let (n, d) = (latents.nrows(), latents.ncols());
    let k = factors.ncols();
    if factors.nrows() != n {
        return Err(Error::ShapeMismatch {
            op: "mig",
            lhs: latents.shape().to_vec(),
            rhs: factors.shape().to_vec(),
        });
    }
    if n < 100 {
        return Err(Error::InvalidArgument(format!(
            "mig needs at least 100 samples, got {n}"
        )));
    }
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("mig needs bins >= 2, got {bins}")));
    }
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "mig needs at least 2 latent dimensions for a gap, got {d}"
        )));
    }
    let binned: Vec<Vec<usize>> = (0..d)
        .map(|j| {
            let col: Vec<f64> = latents.column(j).to_vec();
            rank_bins(&col, bins)
        })
        .collect();

    let mut warnings = Vec::new();
    let mut total = 0.0;
    let mut scored = 0usize;
    for f in 0..k {
        let fac: Vec<usize> = factors.column(f).to_vec();
        let h = entropy_disc(&fac);
        if h <= 0.0 {
            warnings.push(format!("factor {f} is constant; skipped"));
            continue;
        }
        let (mut best, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for bz in &binned {
            let m = mi_disc(bz, &fac);
            if m > best {
                second = best;
                best = m;
            } else if m > second {
                second = m;
            }
        }
        total += (best - second) / h;
        scored += 1;
    }
    if scored == 0 {
        return Err(Error::InvalidArgument("mig: every factor is constant".into()));
    }
    Ok(MigReport { score: total / scored as f64, warnings })
}

/// Sample Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            op: "pearson",
            lhs: vec![a.len()],
            rhs: vec![b.len()],
        });
    }
    if a.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "pearson needs at least 3 points, got {}",
            a.len()
        )));
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::InvalidArgument(
            "pearson is undefined for a constant series".into(),
        ));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Result of [`phase_detect`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseReport {
    /// Index of the global max of the smoothed series (first if tied),
    /// in smoothed coordinates (window-1 offset from the raw series).
    pub peak_index: usize,
    /// Whether the final smoothed value sits more than 5% below peak.
    pub final_below_peak: bool,
}

/// Smooth with a trailing moving average of `window`, find the global
/// peak, and report whether the series ends at least 5% (relative)
/// below that peak: the fitting-then-compression signature.
pub fn phase_detect(series: &[f64], window: usize) -> Result<PhaseReport> {
    if window == 0 || series.len() <= 2 * window {
        return Err(Error::InvalidArgument(format!(
            "phase_detect needs length > 2*window, got {} with window {window}",
            series.len()
        )));
    }
    let smoothed: Vec<f64> = series
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect();
    let mut peak_index = 0;
    for (i, &v) in smoothed.iter().enumerate() {
        if v > smoothed[peak_index] {
            peak_index = i;
        }
    }
    let peak = smoothed[peak_index];
    let last = *smoothed.last().unwrap();
    Ok(PhaseReport {
        peak_index,
        final_below_peak: peak - last > 0.05 * peak.abs(),
    })
}

/// Least-squares slope of a series against its index; the trend-sign
/// helper for estimator cross-checks.
pub fn trend_slope(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "trend_slope needs at least 2 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = (nf - 1.0) / 2.0;
    let my = series.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in series.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    Ok(sxy / sxx)
}
