//! Minibatch training loop with in-module Adam and the information-
//! plane instrument.
//!
//! All randomness derives from one seed: weight noise, batch order,
//! reparameterization draws, and instrument sampling each use their own
//! substream, so two runs with equal configs produce identical traces.

use ndarray::{Array2, ArrayD, ArrayView2};

use crate::dataset::BatchIndices;
use crate::gram::KernelSpec;
use crate::renyi::{info_plane_measure, mean_triples, InfoPlanePoint};
use crate::rng::{normal, stream, Stream};
use crate::{Error, Result};

use super::loss::{forward_loss, LossSpec};
use super::VaeModel;

/// Information-plane instrument settings. Defaults follow the
/// measurement protocol: 6,400 fresh samples in 100 batches of 64,
/// entropy order 1.01, kernel width via the per-variable median rule.
#[derive(Clone, Copy, Debug)]
pub struct InstrumentConfig {
    pub samples: usize,
    pub batch: usize,
    pub alpha: f64,
    pub width_multiplier: f64,
}

impl Default for InstrumentConfig {
    fn default() -> Self {
        Self { samples: 6400, batch: 64, alpha: 1.01, width_multiplier: 1.0 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Instrument cadence in steps.
    pub log_every: usize,
    pub seed: u64,
    /// Allow loss specs whose validation would otherwise refuse.
    pub force: bool,
    /// When absent the loop skips information-plane measurement.
    pub instrument: Option<InstrumentConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            batch_size: 64,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            log_every: 100,
            seed: 0,
            force: false,
            instrument: Some(InstrumentConfig::default()),
        }
    }
}

/// Loss values of one step.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord {
    pub step: usize,
    /// Mean Bernoulli log-likelihood (higher is better).
    pub recon: f64,
    /// Negated objective (lower is better).
    pub total: f64,
}

/// One information-plane measurement, all in bits.
#[derive(Clone, Copy, Debug)]
pub struct InfoPlaneRecord {
    pub step: usize,
    pub i_xz: f64,
    pub t_z: f64,
    pub h_z: f64,
}

pub struct TrainOutput {
    pub model: VaeModel,
    pub steps: Vec<StepRecord>,
    pub info_plane: Vec<InfoPlaneRecord>,
    /// Validation warnings surfaced by the loss spec.
    pub warnings: Vec<String>,
}

struct Adam {
    m: Vec<ArrayD<f64>>,
    v: Vec<ArrayD<f64>>,
    t: usize,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    fn new(model: &VaeModel, cfg: &TrainConfig) -> Self {
        let zeros: Vec<ArrayD<f64>> =
            model.params.iter().map(|p| ArrayD::zeros(p.values.raw_dim())).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
        }
    }

    /// One descent step on the given loss gradients.
    fn apply(&mut self, model: &mut VaeModel, grads: &[ArrayD<f64>]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((param, m), (v, grad)) in model
            .params
            .iter_mut()
            .zip(&mut self.m)
            .zip(self.v.iter_mut().zip(grads))
        {
            ndarray::Zip::from(&mut param.values)
                .and(m)
                .and(v)
                .and(grad)
                .for_each(|p, m, v, &g| {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *p -= self.lr * mhat / (vhat.sqrt() + self.epsilon);
                });
        }
    }
}

/// Measure (I(x;z), T(z), H(z)) averaged over fresh sample batches
/// drawn with replacement from the dataset, using sampled codes.
pub fn measure_info_plane(
    model: &VaeModel,
    data: ArrayView2<f64>,
    ic: &InstrumentConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<InfoPlanePoint> {
    let n = data.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot instrument an empty dataset".into()));
    }
    if ic.batch < 2 || ic.samples < ic.batch {
        return Err(Error::InvalidArgument(format!(
            "instrument needs samples >= batch >= 2, got samples {} batch {}",
            ic.samples, ic.batch
        )));
    }
    let kernel = KernelSpec::median_scaled(ic.width_multiplier);
    let n_batches = ic.samples / ic.batch;
    let mut points = Vec::with_capacity(n_batches);
    for _ in 0..n_batches {
        let idx: Vec<usize> =
            (0..ic.batch).map(|_| (crate::rng::uniform(rng) * n as f64) as usize % n).collect();
        let mut x = Array2::zeros((ic.batch, data.ncols()));
        for (row, &i) in idx.iter().enumerate() {
            x.row_mut(row).assign(&data.row(i));
        }
        let (mu, logvar) = model.encode_arrays(x.view());
        let mut z = mu;
        ndarray::Zip::from(&mut z).and(&logvar).for_each(|z, &lv| {
            *z += (0.5 * lv).exp() * normal(rng);
        });
        points.push(info_plane_measure(x.view(), z.view(), &kernel, ic.alpha)?);
    }
    mean_triples(&points)
}

/// Standard minibatch loop: validate the spec, then per step gather a
/// batch, run the differentiable pass, descend the negated objective
/// with Adam, and record losses. Every `log_every` steps the instrument
/// measures the information plane on fresh samples. A non-finite loss
/// aborts with the index of the last good record.
pub fn train(
    model: VaeModel,
    data: ArrayView2<f64>,
    spec: &LossSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    let warnings = spec.validate(cfg.force)?;
    let n = data.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    if data.ncols() != model.config.input_dim {
        return Err(Error::ShapeMismatch {
            op: "train",
            lhs: data.shape().to_vec(),
            rhs: vec![n, model.config.input_dim],
        });
    }
    if cfg.log_every == 0 {
        return Err(Error::InvalidArgument("log_every must be >= 1".into()));
    }

    let mut model = model;
    let mut indices = BatchIndices::new(n, cfg.seed, cfg.batch_size)?;
    let mut reparam_rng = stream(cfg.seed, Stream::Reparam);
    let mut instrument_rng = stream(cfg.seed, Stream::InfoPlane);
    let mut adam = Adam::new(&model, cfg);
    let mut steps = Vec::with_capacity(cfg.steps);
    let mut info_plane = Vec::new();

    for step in 0..cfg.steps {
        let idx = indices.next().expect("index stream is infinite");
        let mut x = Array2::zeros((cfg.batch_size, data.ncols()));
        for (row, &i) in idx.iter().enumerate() {
            x.row_mut(row).assign(&data.row(i));
        }

        let pass = forward_loss(&model, spec, x.view(), n, step, &mut reparam_rng);
        let (mut g, gp, terms) = match pass {
            Ok(ok) => ok,
            Err(Error::NanTerm(_)) => {
                return Err(Error::Diverged {
                    step,
                    last_good: steps.len().saturating_sub(1),
                });
            }
            Err(e) => return Err(e),
        };

        let descent = g.neg(terms.objective);
        g.backward(descent)?;
        let grads: Vec<ArrayD<f64>> = gp.ids.iter().map(|&t| g.grad(t).clone()).collect();
        drop(g);
        adam.apply(&mut model, &grads);

        steps.push(StepRecord { step, recon: terms.recon, total: terms.total });

        if step % cfg.log_every == 0 {
            if let Some(ic) = &cfg.instrument {
                let p = measure_info_plane(&model, data, ic, &mut instrument_rng)?;
                info_plane.push(InfoPlaneRecord { step, i_xz: p.i_xz, t_z: p.t_z, h_z: p.h_z });
            }
        }
    }

    Ok(TrainOutput { model, steps, info_plane, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::uniform;
    use crate::vae::ModelConfig;

    fn toy_data(n: usize, pixels: usize, seed: u64) -> Array2<f64> {
        let mut rng = stream(seed, Stream::Data);
        Array2::from_shape_fn((n, pixels), |_| if uniform(&mut rng) > 0.5 { 1.0 } else { 0.0 })
    }

    fn toy_config(steps: usize) -> TrainConfig {
        TrainConfig {
            steps,
            batch_size: 4,
            learning_rate: 1e-3,
            log_every: 5,
            seed: 11,
            instrument: None,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_steps_returns_the_initial_model() {
        let model = VaeModel::new(ModelConfig { input_dim: 12, latent_dim: 3 }, 1);
        let data = toy_data(8, 12, 2);
        let out = train(model.clone(), data.view(), &LossSpec::Elbo, &toy_config(0)).unwrap();
        for (a, b) in model.params.iter().zip(&out.model.params) {
            assert_eq!(a.values, b.values);
        }
        assert!(out.steps.is_empty());
        assert!(out.info_plane.is_empty());
    }

    #[test]
    fn fixed_seed_gives_bit_identical_traces() {
        let run = || {
            let model = VaeModel::new(ModelConfig { input_dim: 12, latent_dim: 3 }, 1);
            let data = toy_data(16, 12, 2);
            train(model, data.view(), &LossSpec::BetaVae { beta: 2.0 }, &toy_config(25)).unwrap()
        };
        let a = run();
        let b = run();
        let ta: Vec<(f64, f64)> = a.steps.iter().map(|r| (r.recon, r.total)).collect();
        let tb: Vec<(f64, f64)> = b.steps.iter().map(|r| (r.recon, r.total)).collect();
        assert_eq!(ta, tb);
        for (pa, pb) in a.model.params.iter().zip(&b.model.params) {
            assert_eq!(pa.values, pb.values);
        }
    }

    #[test]
    fn elbo_memorizes_a_tiny_dataset() {
        let model = VaeModel::new(ModelConfig { input_dim: 12, latent_dim: 3 }, 3);
        let data = toy_data(8, 12, 4);
        let mut cfg = toy_config(2000);
        cfg.batch_size = 8;
        cfg.learning_rate = 1e-3;
        let out = train(model, data.view(), &LossSpec::Elbo, &cfg).unwrap();
        let initial: f64 = -out.steps[0].recon;
        let last: f64 = -out.steps.last().unwrap().recon;
        assert!(
            last < 0.5 * initial,
            "reconstruction loss {last} did not halve from {initial}"
        );
    }

    #[test]
    fn runaway_learning_rate_reports_divergence() {
        // The step size must be large enough to overflow a forward pass
        // outright; the stable softplus/logsumexp forms keep merely
        // large weights finite.
        let model = VaeModel::new(ModelConfig { input_dim: 12, latent_dim: 3 }, 5);
        let data = toy_data(8, 12, 6);
        let mut cfg = toy_config(200);
        cfg.learning_rate = 1e80;
        match train(model, data.view(), &LossSpec::Elbo, &cfg) {
            Err(Error::Diverged { step, last_good }) => {
                assert!(last_good < step.max(1));
            }
            other => panic!("expected divergence, got {:?}", other.map(|_| "ok")),
        }
    }

    #[test]
    fn instrument_fires_on_schedule() {
        let model = VaeModel::new(ModelConfig { input_dim: 12, latent_dim: 3 }, 7);
        let data = toy_data(32, 12, 8);
        let mut cfg = toy_config(10);
        cfg.log_every = 3;
        cfg.instrument = Some(InstrumentConfig { samples: 32, batch: 8, ..Default::default() });
        let out = train(model, data.view(), &LossSpec::Elbo, &cfg).unwrap();
        let at: Vec<usize> = out.info_plane.iter().map(|r| r.step).collect();
        assert_eq!(at, vec![0, 3, 6, 9]);
        for r in &out.info_plane {
            assert!(r.i_xz.is_finite() && r.t_z.is_finite() && r.h_z.is_finite());
            assert!(r.i_xz >= 0.0 && r.h_z >= 0.0);
        }
    }

    #[test]
    fn oversized_batches_and_bad_specs_are_rejected() {
        let model = VaeModel::new(ModelConfig { input_dim: 12, latent_dim: 3 }, 9);
        let data = toy_data(8, 12, 10);
        let mut cfg = toy_config(1);
        cfg.batch_size = 16;
        assert!(train(model.clone(), data.view(), &LossSpec::Elbo, &cfg).is_err());

        let cfg = toy_config(1);
        let bad = LossSpec::PriVae { alpha: 2.0, beta: 1.0 };
        match train(model, data.view(), &bad, &cfg) {
            Err(Error::PriVaeRegime { .. }) => {}
            other => panic!("expected regime refusal, got {:?}", other.map(|_| "ok")),
        }
    }

    #[test]
    fn warnings_surface_in_the_output() {
        let model = VaeModel::new(ModelConfig { input_dim: 12, latent_dim: 3 }, 11);
        let data = toy_data(8, 12, 12);
        let spec = LossSpec::PriVae { alpha: 1.0, beta: 1.5 };
        let out = train(model, data.view(), &spec, &toy_config(2)).unwrap();
        assert_eq!(out.warnings.len(), 1);
    }
}
