//! Matrix-based Rényi α-order entropy and its composites.
//!
//! The entropy of a [`NormalizedGram`] A is
//! `S_α(A) = (1/(1−α)) · log₂ Σᵢ λᵢ(A)^α` over the eigenvalues of A,
//! which form a distribution on the simplex because A is unit-trace
//! PSD. α = 1 is served by the limit form `−Σ λᵢ log₂ λᵢ`. Mutual
//! information and total correlation follow the Shannon template with
//! joint entropies realized by Hadamard products.
//!
//! Everything is reported in bits.

use ndarray::ArrayView2;

use crate::gram::{gram, hadamard_joint, KernelSpec, NormalizedGram};
use crate::{Error, Result};

/// Eigenvalues below this are treated as exact zeros before powering;
/// roundoff negatives would otherwise turn fractional powers into NaN.
pub const EIGENVALUE_CLAMP: f64 = 1e-12;

/// An entropy value with the context needed to interpret it.
#[derive(Clone, Copy, Debug)]
pub struct EntropyEstimate {
    pub bits: f64,
    /// The order used; exactly 1.0 means the Shannon-limit form.
    pub alpha: f64,
    pub n: usize,
}

/// Eigenvalues of the gram via a symmetric (self-adjoint) solver.
pub fn spectrum(a: &NormalizedGram) -> Result<Vec<f64>> {
    let n = a.n();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a.entries()[[i, j]]);
    let eig = nalgebra::SymmetricEigen::try_new(m, 1e-13, 0)
        .ok_or_else(|| Error::Eigen(format!("symmetric eigensolver did not converge on a {n}x{n} gram")))?;
    Ok(eig.eigenvalues.iter().copied().collect())
}

/// Rényi α-entropy of a normalized Gram matrix, in bits.
pub fn entropy(a: &NormalizedGram, alpha: f64) -> Result<EntropyEstimate> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "entropy order alpha must be positive and finite, got {alpha}"
        )));
    }
    let lambdas = spectrum(a)?;
    let bits = if alpha == 1.0 {
        -lambdas
            .iter()
            .filter(|&&l| l >= EIGENVALUE_CLAMP)
            .map(|&l| l * l.log2())
            .sum::<f64>()
    } else {
        let s: f64 = lambdas
            .iter()
            .map(|&l| if l < EIGENVALUE_CLAMP { 0.0 } else { l.powf(alpha) })
            .sum();
        s.log2() / (1.0 - alpha)
    };
    // Roundoff can leave a hair below zero; the mathematical range is
    // [0, log2 n].
    Ok(EntropyEstimate { bits: bits.max(0.0), alpha, n: a.n() })
}

/// `S_α(A) + S_α(B) − S_α(A ∘ B normalized)`, in bits.
pub fn mutual_information(a: &NormalizedGram, b: &NormalizedGram, alpha: f64) -> Result<f64> {
    let joint = hadamard_joint(&[a, b])?;
    Ok(entropy(a, alpha)?.bits + entropy(b, alpha)?.bits - entropy(&joint, alpha)?.bits)
}

/// `Σⱼ S_α(Aⱼ) − S_α(A₁ ∘ … ∘ A_d normalized)` over per-dimension
/// grams, in bits.
pub fn total_correlation(grams: &[NormalizedGram], alpha: f64) -> Result<f64> {
    if grams.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "total correlation needs at least 2 dimensions, got {}",
            grams.len()
        )));
    }
    let refs: Vec<&NormalizedGram> = grams.iter().collect();
    let joint = hadamard_joint(&refs)?;
    let marginal_sum: f64 = grams
        .iter()
        .map(|g| entropy(g, alpha).map(|e| e.bits))
        .sum::<Result<f64>>()?;
    Ok(marginal_sum - entropy(&joint, alpha)?.bits)
}

/// One minibatch worth of information-plane coordinates.
#[derive(Clone, Copy, Debug)]
pub struct InfoPlanePoint {
    /// Mutual information between the input batch and the code batch.
    pub i_xz: f64,
    /// Total correlation across code dimensions.
    pub t_z: f64,
    /// Entropy of the code batch.
    pub h_z: f64,
}

/// Measure (I(x;z), T(z), H(z)) on one minibatch. The kernel rule is
/// resolved independently per variable: once on the x batch, once on
/// the z batch, and once per z column for the total-correlation
/// marginals. Callers average many batches; see [`mean_triples`].
pub fn info_plane_measure(
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    kernel: &KernelSpec,
    alpha: f64,
) -> Result<InfoPlanePoint> {
    if x.nrows() != z.nrows() {
        return Err(Error::ShapeMismatch {
            op: "info_plane_measure",
            lhs: x.shape().to_vec(),
            rhs: z.shape().to_vec(),
        });
    }
    let ax = gram(x, kernel)?;
    let az = gram(z, kernel)?;
    let i_xz = mutual_information(&ax, &az, alpha)?;
    let h_z = entropy(&az, alpha)?.bits;
    let t_z = if z.ncols() >= 2 {
        let mut dims = Vec::with_capacity(z.ncols());
        for j in 0..z.ncols() {
            let col = z.slice(ndarray::s![.., j..j + 1]);
            dims.push(gram(col, kernel)?);
        }
        total_correlation(&dims, alpha)?
    } else {
        0.0
    };
    Ok(InfoPlanePoint { i_xz, t_z, h_z })
}

/// Componentwise mean of measured triples; the instrument's averaging
/// step (a mean of B iid measurements has 1/√B of the single-shot
/// standard deviation).
pub fn mean_triples(points: &[InfoPlanePoint]) -> Result<InfoPlanePoint> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("mean of zero measurements".into()));
    }
    let n = points.len() as f64;
    Ok(InfoPlanePoint {
        i_xz: points.iter().map(|p| p.i_xz).sum::<f64>() / n,
        t_z: points.iter().map(|p| p.t_z).sum::<f64>() / n,
        h_z: points.iter().map(|p| p.h_z).sum::<f64>() / n,
    })
}
