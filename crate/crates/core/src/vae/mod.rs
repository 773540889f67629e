//! Gaussian-encoder / Bernoulli-decoder VAE with a registry of eight
//! training objectives sharing one set of minibatch density estimates.
//!
//! The model is a pair of two-hidden-layer ReLU MLPs (256 and 128 units
//! encoder-side, mirrored decoder-side). The encoder emits means and
//! log-variances of a diagonal Gaussian over `latent_dim` codes; the
//! decoder emits Bernoulli logits per pixel. All losses are phrased as
//! objectives to maximize; the trainer descends their negation.

mod density;
pub mod discrete;
mod loss;
mod train;

pub use density::{gaussian_kl_closed_form, minibatch_weighted_densities, reparameterized_sample, DensityEstimates};
pub use loss::{forward_loss, grad_check_loss, loss, LossSpec, LossTerms};
pub use train::{measure_info_plane, train, InfoPlaneRecord, InstrumentConfig, StepRecord, TrainConfig, TrainOutput};

use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayD, ArrayView2, IxDyn};

use crate::graph::{Graph, Parameter, Tensor};
use crate::rng::{stream, uniform_sym, Stream};
use crate::{Error, Result};

/// Hidden widths shared by both MLPs (reversed for the decoder).
pub const HIDDEN: [usize; 2] = [256, 128];

/// Geometry of the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub latent_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { input_dim: crate::dataset::IMAGE_PIXELS, latent_dim: 10 }
    }
}

/// The trainable model: parameter tensors live here between steps and
/// are leafed into a fresh graph per forward pass.
#[derive(Clone)]
#[derive(Debug)]
pub struct VaeModel {
    pub config: ModelConfig,
    pub params: Vec<Parameter>,
}

/// Per-graph handles to the model parameters, in `params` order.
#[derive(Debug)]
pub struct GraphParams {
    ids: Vec<Tensor>,
}

fn linear_init(rng: &mut rand_chacha::ChaCha8Rng, fan_in: usize, fan_out: usize) -> (ArrayD<f64>, ArrayD<f64>) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let w = ArrayD::from_shape_fn(IxDyn(&[fan_in, fan_out]), |_| uniform_sym(rng, bound));
    let b = ArrayD::from_shape_fn(IxDyn(&[fan_out]), |_| uniform_sym(rng, bound));
    (w, b)
}

impl VaeModel {
    /// Fresh model with uniform `±1/sqrt(fan_in)` initialization.
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        let mut rng = stream(seed, Stream::WeightInit);
        let d = config.latent_dim;
        let enc_dims = [config.input_dim, HIDDEN[0], HIDDEN[1], 2 * d];
        let dec_dims = [d, HIDDEN[1], HIDDEN[0], config.input_dim];
        let mut params = Vec::new();
        for (side, dims) in [("encoder", enc_dims), ("decoder", dec_dims)] {
            for layer in 0..3 {
                let (w, b) = linear_init(&mut rng, dims[layer], dims[layer + 1]);
                params.push(Parameter::new(format!("{side}.{layer}.weight"), w));
                params.push(Parameter::new(format!("{side}.{layer}.bias"), b));
            }
        }
        Self { config, params }
    }

    /// Leaf every parameter into `g` for one forward/backward pass.
    pub fn prepare(&self, g: &mut Graph) -> GraphParams {
        GraphParams { ids: self.params.iter().map(|p| g.leaf(p.values.clone())).collect() }
    }

    /// Encoder forward on the graph: returns (mu, log-variance), the
    /// latter clamped to [-20, 2].
    pub fn encode(&self, g: &mut Graph, gp: &GraphParams, x: Tensor) -> Result<(Tensor, Tensor)> {
        let mut h = x;
        for layer in 0..3 {
            let w = gp.ids[layer * 2];
            let b = gp.ids[layer * 2 + 1];
            h = g.matmul(h, w)?;
            h = g.add(h, b)?;
            if layer < 2 {
                h = g.relu(h);
            }
        }
        let d = self.config.latent_dim;
        let mu = g.slice(h, 1, 0, d)?;
        let raw = g.slice(h, 1, d, 2 * d)?;
        let logvar = g.clamp(raw, -20.0, 2.0);
        Ok((mu, logvar))
    }

    /// Decoder forward on the graph: Bernoulli logits per pixel.
    pub fn decode(&self, g: &mut Graph, gp: &GraphParams, z: Tensor) -> Result<Tensor> {
        let mut h = z;
        for layer in 0..3 {
            let w = gp.ids[6 + layer * 2];
            let b = gp.ids[6 + layer * 2 + 1];
            h = g.matmul(h, w)?;
            h = g.add(h, b)?;
            if layer < 2 {
                h = g.relu(h);
            }
        }
        Ok(h)
    }

    /// Gradient of the last backward pass for each parameter, in order.
    pub fn grads<'g>(&self, g: &'g Graph, gp: &GraphParams) -> Vec<&'g ArrayD<f64>> {
        gp.ids.iter().map(|&t| g.grad(t)).collect()
    }

    /// Plain-array encoder forward for measurement paths that do not
    /// need gradients. Mirrors [`VaeModel::encode`] exactly.
    pub fn encode_arrays(&self, x: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let mut h = x.to_owned();
        for layer in 0..3 {
            let w2 = as_2d(&self.params[layer * 2].values);
            let b1 = as_1d(&self.params[layer * 2 + 1].values);
            let mut out = h.dot(&w2);
            out += &b1;
            if layer < 2 {
                out.mapv_inplace(|v| v.max(0.0));
            }
            h = out;
        }
        let d = self.config.latent_dim;
        let mu = h.slice(ndarray::s![.., 0..d]).to_owned();
        let logvar = h.slice(ndarray::s![.., d..2 * d]).mapv(|v| v.clamp(-20.0, 2.0));
        (mu, logvar)
    }

    /// Plain-array decoder forward (logits), for reconstructions
    /// outside the training graph.
    pub fn decode_arrays(&self, z: ArrayView2<f64>) -> Array2<f64> {
        let mut h = z.to_owned();
        for layer in 0..3 {
            let w2 = as_2d(&self.params[6 + layer * 2].values);
            let b1 = as_1d(&self.params[6 + layer * 2 + 1].values);
            let mut out = h.dot(&w2);
            out += &b1;
            if layer < 2 {
                out.mapv_inplace(|v| v.max(0.0));
            }
            h = out;
        }
        h
    }

    /// Serialize to the versioned binary checkpoint format.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(b"PRIV");
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for p in &self.params {
            let name = p.name.as_bytes();
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name);
            let shape = p.values.shape();
            buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for &dim in shape {
                buf.extend_from_slice(&(dim as u32).to_le_bytes());
            }
            for v in p.values.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    /// Load a checkpoint saved by [`VaeModel::save`]. The geometry is
    /// recovered from the stored shapes.
    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut off = 0usize;
        let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
            if *off + n > bytes.len() {
                return Err(Error::Checkpoint("checkpoint truncated".into()));
            }
            let s = &bytes[*off..*off + n];
            *off += n;
            Ok(s)
        };
        if take(&mut off, 4)? != b"PRIV" {
            return Err(Error::Checkpoint("bad checkpoint magic".into()));
        }
        let ver = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap());
        if ver != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unknown checkpoint format version {ver}")));
        }
        let mut params = Vec::new();
        while off < bytes.len() {
            let name_len = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(take(&mut off, name_len)?.to_vec())
                .map_err(|_| Error::Checkpoint("parameter name is not utf-8".into()))?;
            let rank = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize);
            }
            let count: usize = shape.iter().product();
            let raw = take(&mut off, count * 8)?;
            let values: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let arr = ArrayD::from_shape_vec(IxDyn(&shape), values)
                .map_err(|e| Error::Checkpoint(format!("bad parameter shape: {e}")))?;
            params.push(Parameter::new(name, arr));
        }
        let config = config_from_params(&params)?;
        Ok(Self { config, params })
    }
}

const CHECKPOINT_VERSION: u32 = 1;

fn config_from_params(params: &[Parameter]) -> Result<ModelConfig> {
    if params.len() != 12 {
        return Err(Error::Checkpoint(format!(
            "expected 12 parameter tensors, found {}",
            params.len()
        )));
    }
    let first = params[0].values.shape();
    let last_enc = params[4].values.shape();
    if first.len() != 2 || last_enc.len() != 2 || last_enc[1] % 2 != 0 {
        return Err(Error::Checkpoint("unexpected encoder geometry".into()));
    }
    Ok(ModelConfig { input_dim: first[0], latent_dim: last_enc[1] / 2 })
}

fn as_2d(a: &ArrayD<f64>) -> Array2<f64> {
    a.view().into_dimensionality::<ndarray::Ix2>().unwrap().to_owned()
}

fn as_1d(a: &ArrayD<f64>) -> Array1<f64> {
    a.view().into_dimensionality::<ndarray::Ix1>().unwrap().to_owned()
}
