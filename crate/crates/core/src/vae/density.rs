//! Reparameterized sampling, closed-form Gaussian KL, and the
//! minibatch-weighted density estimates shared by every objective.

use ndarray::{ArrayD, IxDyn};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, Tensor};
use crate::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

/// Per-sample log-density estimates over one batch, all living on the
/// same graph as the forward pass so they are differentiable.
#[derive(Debug)]
pub struct DensityEstimates {
    /// `log q̂(zᵢ)` via the weighted minibatch mixture, shape `[M]`.
    pub log_qz: Tensor,
    /// `log q̂(zᵢⱼ)` per latent dimension, shape `[M, d]`.
    pub log_qz_dims: Tensor,
    /// Standard-normal prior `log p(zᵢ)`, shape `[M]`.
    pub log_pz: Tensor,
    /// Per-dimension prior `log p(zᵢⱼ)`, shape `[M, d]`.
    pub log_pz_dims: Tensor,
    /// Conditional `log q(zᵢ|xᵢ)` of each sample under its own
    /// posterior, shape `[M]`.
    pub log_qz_given_x: Tensor,
}

fn check_batch_shape(g: &Graph, mu: Tensor, logvar: Tensor) -> Result<(usize, usize)> {
    let ms = g.shape(mu).to_vec();
    let ls = g.shape(logvar).to_vec();
    if ms.len() != 2 || ms != ls {
        return Err(Error::ShapeMismatch { op: "reparameterize", lhs: ms, rhs: ls });
    }
    Ok((ms[0], ms[1]))
}

/// Draw `z = μ + σ ⊙ ε` with `ε ~ N(0, I)` from `rng`. The noise enters
/// as a leaf, so gradients flow through μ and log σ² only.
pub fn reparameterized_sample(
    g: &mut Graph,
    mu: Tensor,
    logvar: Tensor,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor> {
    let (m, d) = check_batch_shape(g, mu, logvar)?;
    let eps = ArrayD::from_shape_vec(IxDyn(&[m, d]), crate::rng::normal_vec(rng, m * d)).unwrap();
    let eps = g.leaf(eps);
    let half = g.scale(logvar, 0.5);
    let sigma = g.exp(half);
    let noise = g.mul(sigma, eps)?;
    g.add(mu, noise)
}

/// Per-sample `KL(q(z|x) ‖ N(0, I))` in nats:
/// `½ Σⱼ (μⱼ² + σⱼ² − 1 − log σⱼ²)`. Shape `[M]`.
pub fn gaussian_kl_closed_form(g: &mut Graph, mu: Tensor, logvar: Tensor) -> Result<Tensor> {
    check_batch_shape(g, mu, logvar)?;
    let mu2 = g.square(mu);
    let var = g.exp(logvar);
    let a = g.add(mu2, var)?;
    let b = g.sub(a, logvar)?;
    let c = g.add_scalar(b, -1.0);
    let summed = g.sum_axis(c, 1)?;
    Ok(g.scale(summed, 0.5))
}

/// Diagonal-Gaussian log-density of each `zᵢ` under its own posterior
/// `(μᵢ, σᵢ)`, shape `[M]`.
fn conditional_log_density(g: &mut Graph, z: Tensor, mu: Tensor, logvar: Tensor) -> Result<Tensor> {
    let diff = g.sub(z, mu)?;
    let dsq = g.square(diff);
    let neg_lv = g.neg(logvar);
    let inv_var = g.exp(neg_lv);
    let quad = g.mul(dsq, inv_var)?;
    let t = g.add(logvar, quad)?;
    let t = g.add_scalar(t, LN_2PI);
    let t = g.scale(t, -0.5);
    g.sum_axis(t, 1)
}

/// Weighted minibatch mixture estimates of the aggregate posterior:
/// `log q̂(zᵢ) = logsumexp_j log q(zᵢ|xⱼ) − log(N·M)` with `N` the true
/// dataset size, plus the per-dimension, prior, and conditional
/// log-densities every objective needs.
pub fn minibatch_weighted_densities(
    g: &mut Graph,
    z: Tensor,
    mu: Tensor,
    logvar: Tensor,
    dataset_size: usize,
) -> Result<DensityEstimates> {
    let (m, d) = check_batch_shape(g, mu, logvar)?;
    if g.shape(z) != [m, d] {
        return Err(Error::ShapeMismatch {
            op: "minibatch_weighted_densities",
            lhs: g.shape(z).to_vec(),
            rhs: vec![m, d],
        });
    }
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "minibatch density estimation needs a batch of at least 2 samples, got {m}"
        )));
    }
    if dataset_size < m {
        return Err(Error::InvalidArgument(format!(
            "dataset_size {dataset_size} is smaller than the batch size {m}"
        )));
    }

    // Pairwise per-dimension log-densities: entry [i, j, k] is the
    // log-density of z_i's k-th coordinate under posterior j.
    let zr = g.reshape(z, &[m, 1, d])?;
    let mur = g.reshape(mu, &[1, m, d])?;
    let lvr = g.reshape(logvar, &[1, m, d])?;
    let diff = g.sub(zr, mur)?;
    let dsq = g.square(diff);
    let neg_lv = g.neg(lvr);
    let inv_var = g.exp(neg_lv);
    let quad = g.mul(dsq, inv_var)?;
    let t = g.add(lvr, quad)?;
    let t = g.add_scalar(t, LN_2PI);
    let ll_dims = g.scale(t, -0.5);
    let ll_joint = g.sum_axis(ll_dims, 2)?;

    let log_nm = (dataset_size as f64 * m as f64).ln();
    let lse_joint = g.logsumexp(ll_joint, 1)?;
    let log_qz = g.add_scalar(lse_joint, -log_nm);
    let lse_dims = g.logsumexp(ll_dims, 1)?;
    let log_qz_dims = g.add_scalar(lse_dims, -log_nm);

    let z2 = g.square(z);
    let z2c = g.add_scalar(z2, LN_2PI);
    let log_pz_dims = g.scale(z2c, -0.5);
    let log_pz = g.sum_axis(log_pz_dims, 1)?;

    let log_qz_given_x = conditional_log_density(g, z, mu, logvar)?;

    for (name, t) in [
        ("log_qz", log_qz),
        ("log_qz_dims", log_qz_dims),
        ("log_pz", log_pz),
        ("log_qz_given_x", log_qz_given_x),
    ] {
        if g.values(t).iter().any(|v| !v.is_finite()) {
            return Err(Error::NanTerm(name));
        }
    }

    Ok(DensityEstimates { log_qz, log_qz_dims, log_pz, log_pz_dims, log_qz_given_x })
}
