//! Kernel evaluation and normalized Gram matrices.
//!
//! A [`NormalizedGram`] is the unit-trace, PSD matrix
//! `A_ij = (1/N) K_ij / sqrt(K_ii K_jj)` built from an RBF kernel.
//! Its spectrum lives on the probability simplex, which is what the
//! entropy estimators consume. Joint variables compose by Hadamard
//! product followed by trace renormalization.

use ndarray::{Array2, ArrayView2, Axis};

use crate::{Error, Result};

/// How the RBF width σ is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum WidthRule {
    /// Explicit σ.
    Fixed(f64),
    /// σ = c · median pairwise Euclidean distance.
    MedianScaled(f64),
    /// Silverman's rule of thumb: σ = (4/(d+2))^{1/(d+4)} · N^{−1/(d+4)} · s̄,
    /// with s̄ the mean per-dimension sample standard deviation.
    Silverman,
}

/// RBF kernel with a width rule. The only kernel family here; entropy
/// estimates need an infinitely divisible kernel and the Gaussian is
/// the standard choice.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub rule: WidthRule,
}

impl KernelSpec {
    pub fn fixed(sigma: f64) -> Self {
        Self { rule: WidthRule::Fixed(sigma) }
    }

    /// Median pairwise distance, the default used throughout.
    pub fn median() -> Self {
        Self { rule: WidthRule::MedianScaled(1.0) }
    }

    pub fn median_scaled(c: f64) -> Self {
        Self { rule: WidthRule::MedianScaled(c) }
    }

    pub fn silverman() -> Self {
        Self { rule: WidthRule::Silverman }
    }

    /// Resolve the rule to a concrete σ for `data`.
    pub fn resolve(&self, data: ArrayView2<f64>) -> Result<f64> {
        match self.rule {
            WidthRule::Fixed(sigma) => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "kernel width must be a positive finite number, got {sigma}"
                    )));
                }
                Ok(sigma)
            }
            WidthRule::MedianScaled(c) => {
                if !(c > 0.0) || !c.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "median width multiplier must be positive, got {c}"
                    )));
                }
                let med = median_pairwise_distance(data)?;
                if med <= 0.0 {
                    return Err(Error::DegenerateWidth {
                        rule: format!("median-distance-multiple({c})"),
                        reason: "median pairwise distance is zero (duplicate-heavy data)".into(),
                    });
                }
                Ok(c * med)
            }
            WidthRule::Silverman => {
                let (n, d) = (data.nrows() as f64, data.ncols() as f64);
                let mean_std = data
                    .axis_iter(Axis(1))
                    .map(|col| {
                        let m = col.mean().unwrap();
                        (col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (col.len() as f64 - 1.0))
                            .sqrt()
                    })
                    .sum::<f64>()
                    / d;
                if mean_std <= 0.0 {
                    return Err(Error::DegenerateWidth {
                        rule: "silverman".into(),
                        reason: "zero sample standard deviation in every dimension".into(),
                    });
                }
                Ok((4.0 / (d + 2.0)).powf(1.0 / (d + 4.0)) * n.powf(-1.0 / (d + 4.0)) * mean_std)
            }
        }
    }
}

/// Squared Euclidean distances between all row pairs.
pub fn pairwise_sq_dists(data: ArrayView2<f64>) -> Array2<f64> {
    let n = data.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = data
                .row(i)
                .iter()
                .zip(data.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            out[[i, j]] = d2;
            out[[j, i]] = d2;
        }
    }
    out
}

/// Median over the N(N−1)/2 distinct pairwise distances; even counts
/// average the two middle order statistics.
pub fn median_pairwise_distance(data: ArrayView2<f64>) -> Result<f64> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "median pairwise distance needs at least 2 points, got {n}"
        )));
    }
    let d2 = pairwise_sq_dists(data);
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(d2[[i, j]].sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = dists.len();
    Ok(if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    })
}

/// Unit-trace normalized Gram matrix over N samples.
#[derive(Clone, Debug)]
pub struct NormalizedGram {
    n: usize,
    entries: Array2<f64>,
}

impl NormalizedGram {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// Wrap a precomputed matrix, enforcing the cheap structural
    /// invariants (symmetry, unit trace, equal diagonal).
    pub fn from_entries(entries: Array2<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n || n == 0 {
            return Err(Error::ShapeMismatch {
                op: "normalized gram",
                lhs: vec![entries.nrows(), entries.ncols()],
                rhs: vec![n, n],
            });
        }
        let g = Self { n, entries };
        g.check_structure()?;
        Ok(g)
    }

    fn check_structure(&self) -> Result<()> {
        let e = &self.entries;
        let n = self.n;
        let mut trace = 0.0;
        for i in 0..n {
            trace += e[[i, i]];
            for j in (i + 1)..n {
                if (e[[i, j]] - e[[j, i]]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "gram not symmetric at ({i},{j}): {} vs {}",
                        e[[i, j]],
                        e[[j, i]]
                    )));
                }
            }
        }
        if (trace - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("gram trace {trace} != 1")));
        }
        for i in 0..n {
            if (e[[i, i]] - 1.0 / n as f64).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "gram diagonal entry {i} is {}, expected 1/{n}",
                    e[[i, i]]
                )));
            }
        }
        Ok(())
    }

    /// Smallest eigenvalue, for PSD verification in tests. Uses the
    /// same symmetric solver the entropy path uses.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eigs = crate::renyi::spectrum(self)?;
        Ok(eigs.into_iter().fold(f64::INFINITY, f64::min))
    }
}

/// Build the normalized RBF Gram of `data` rows:
/// `A_ij = (1/N) exp(−‖x_i − x_j‖² / (2σ²))` (the K_ii factors are 1
/// for RBF, so the cosine normalization is the plain kernel here).
pub fn gram(data: ArrayView2<f64>, kernel: &KernelSpec) -> Result<NormalizedGram> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "gram needs at least 2 samples, got {n}"
        )));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("gram input data".into()));
    }
    let sigma = kernel.resolve(data)?;
    let d2 = pairwise_sq_dists(data);
    let inv = 1.0 / (2.0 * sigma * sigma);
    let scale = 1.0 / n as f64;
    let entries = d2.mapv(|v| scale * (-v * inv).exp());
    NormalizedGram::from_entries(entries)
}

/// Joint Gram of several variables on the same samples: Hadamard
/// product renormalized to unit trace.
pub fn hadamard_joint(grams: &[&NormalizedGram]) -> Result<NormalizedGram> {
    if grams.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "hadamard_joint needs at least 2 grams, got {}",
            grams.len()
        )));
    }
    let n = grams[0].n;
    for g in grams {
        if g.n != n {
            return Err(Error::ShapeMismatch {
                op: "hadamard_joint",
                lhs: vec![n, n],
                rhs: vec![g.n, g.n],
            });
        }
    }
    let mut prod = grams[0].entries.clone();
    for g in &grams[1..] {
        prod *= &g.entries;
    }
    let trace: f64 = (0..n).map(|i| prod[[i, i]]).sum();
    if trace <= 0.0 {
        return Err(Error::InvalidArgument(
            "hadamard product has non-positive trace".into(),
        ));
    }
    prod /= trace;
    NormalizedGram::from_entries(prod)
}
