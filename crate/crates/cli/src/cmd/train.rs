//! `privae train`: fit a VAE on the built-in factor grid, log the
//! information plane, and summarize disentanglement and phase shape.

use std::path::PathBuf;

use privae_core::dataset::{FactorGrid, IMAGE_PIXELS};
use privae_core::metrics::{mig, pearson, phase_detect};
use privae_core::vae::{train, InstrumentConfig, LossSpec, ModelConfig, TrainConfig, VaeModel};

use crate::cmd::{ensure_dir, resolve_out, resolve_seed, write_file};
use crate::config::{CliResult, Config, Resolved};

pub struct Args {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub force: bool,
}

const ALLOWED: [&str; 20] = [
    "loss",
    "alpha",
    "beta",
    "gamma",
    "lambda",
    "c_max",
    "c_steps",
    "steps",
    "batch_size",
    "learning_rate",
    "log_every",
    "seed",
    "latent_dim",
    "bins",
    "smooth_window",
    "info_samples",
    "info_batch",
    "info_alpha",
    "width_multiplier",
    "out_dir",
];

/// Loss-weight keys are shared across variants, so each variant lists
/// the ones it consumes and the rest are rejected as likely typos.
fn loss_spec(cfg: &Config) -> CliResult<LossSpec> {
    let name = cfg.require("loss")?;
    let need = |key: &str| -> CliResult<f64> {
        cfg.f64_opt(key)?
            .ok_or(format!("loss '{name}' requires key '{key}'"))
    };
    let (spec, used): (LossSpec, &[&str]) = match name {
        "elbo" => (LossSpec::Elbo, &[]),
        "beta_vae" => (LossSpec::BetaVae { beta: need("beta")? }, &["beta"]),
        "annealed_vae" => (
            LossSpec::AnnealedVae {
                gamma: need("gamma")?,
                c_max: need("c_max")?,
                c_steps: cfg
                    .u64_opt("c_steps")?
                    .ok_or(format!("loss '{name}' requires key 'c_steps'"))?
                    as usize,
            },
            &["gamma", "c_max", "c_steps"],
        ),
        "info_vae" => (LossSpec::InfoVae { lambda: need("lambda")? }, &["lambda"]),
        "beta_tcvae" => (LossSpec::BetaTcVae { beta: need("beta")? }, &["beta"]),
        "pri_vae" => (
            LossSpec::PriVae { alpha: need("alpha")?, beta: need("beta")? },
            &["alpha", "beta"],
        ),
        "pri_vae_star" => (
            LossSpec::PriVaeStar {
                alpha: need("alpha")?,
                beta: need("beta")?,
                gamma: need("gamma")?,
            },
            &["alpha", "beta", "gamma"],
        ),
        "beta_tcvae_star" => (LossSpec::BetaTcVaeStar { beta: need("beta")? }, &["beta"]),
        other => {
            return Err(format!(
                "unknown loss '{other}' (expected elbo, beta_vae, annealed_vae, info_vae, \
                 beta_tcvae, pri_vae, pri_vae_star, beta_tcvae_star)"
            ))
        }
    };
    for key in ["alpha", "beta", "gamma", "lambda", "c_max", "c_steps"] {
        if cfg.get(key).is_some() && !used.contains(&key) {
            return Err(format!("key '{key}' is not used by loss '{name}'"));
        }
    }
    Ok(spec)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into())
}

pub fn run(args: Args) -> CliResult<()> {
    let cfg = Config::load(&args.config)?;
    cfg.check_keys(&ALLOWED)?;
    let spec = loss_spec(&cfg)?;
    let seed = resolve_seed(args.seed, &cfg)?;
    let out_dir = resolve_out(args.out, &cfg)?;

    let instrument = InstrumentConfig {
        samples: cfg.usize_or("info_samples", 6400)?,
        batch: cfg.usize_or("info_batch", 64)?,
        alpha: cfg.f64_or("info_alpha", 1.01)?,
        width_multiplier: cfg.f64_or("width_multiplier", 1.0)?,
    };
    let train_cfg = TrainConfig {
        steps: cfg.usize_or("steps", 5000)?,
        batch_size: cfg.usize_or("batch_size", 64)?,
        learning_rate: cfg.f64_or("learning_rate", 1e-4)?,
        log_every: cfg.usize_or("log_every", 100)?,
        seed,
        force: args.force,
        instrument: Some(instrument),
        ..TrainConfig::default()
    };
    let latent_dim = cfg.usize_or("latent_dim", 10)?;
    let bins = cfg.usize_or("bins", 20)?;
    let smooth_window = cfg.usize_or("smooth_window", 5)?;

    let grid = FactorGrid::full();
    let model = VaeModel::new(
        ModelConfig { input_dim: IMAGE_PIXELS, latent_dim },
        seed,
    );
    let out = train(model, grid.images.view(), &spec, &train_cfg)
        .map_err(|e| format!("training failed: {e}"))?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }

    ensure_dir(&out_dir)?;
    out.model
        .save(&out_dir.join("checkpoint.bin"))
        .map_err(|e| format!("cannot write checkpoint: {e}"))?;

    let mut csv = String::from("step,I_xz_bits,T_z_bits,H_z_bits,recon_loss,total_loss\n");
    for rec in &out.info_plane {
        let s = &out.steps[rec.step];
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rec.step, rec.i_xz, rec.t_z, rec.h_z, s.recon, s.total
        ));
    }
    write_file(&out_dir.join("info_plane.csv"), &csv)?;

    let (mu, _) = out.model.encode_arrays(grid.images.view());
    let mig_report =
        mig(mu.view(), grid.factors.view(), bins).map_err(|e| format!("mig failed: {e}"))?;
    for w in &mig_report.warnings {
        eprintln!("warning: {w}");
    }
    let i_series: Vec<f64> = out.info_plane.iter().map(|r| r.i_xz).collect();
    let t_series: Vec<f64> = out.info_plane.iter().map(|r| r.t_z).collect();
    let r = pearson(&i_series, &t_series).ok();
    let phase_i = phase_detect(&i_series, smooth_window).ok();
    let phase_t = phase_detect(&t_series, smooth_window).ok();

    let mut summary = String::new();
    summary.push_str(&format!("final_mig = {:.6}\n", mig_report.score));
    summary.push_str(&format!(
        "final_recon = {}\n",
        fmt_opt(out.steps.last().map(|s| s.recon))
    ));
    summary.push_str(&format!("pearson_i_t = {}\n", fmt_opt(r)));
    for (tag, phase) in [("i_xz", &phase_i), ("t_z", &phase_t)] {
        match phase {
            Some(p) => {
                summary.push_str(&format!("{tag}_peak_index = {}\n", p.peak_index));
                summary.push_str(&format!("{tag}_final_below_peak = {}\n", p.final_below_peak));
            }
            None => {
                summary.push_str(&format!("{tag}_peak_index = n/a\n"));
                summary.push_str(&format!("{tag}_final_below_peak = n/a\n"));
            }
        }
    }
    write_file(&out_dir.join("summary.txt"), &summary)?;
    print!("{summary}");

    let mut resolved = Resolved::new();
    resolved.set("loss", spec.name());
    match spec {
        LossSpec::Elbo => {}
        LossSpec::BetaVae { beta } | LossSpec::BetaTcVae { beta } | LossSpec::BetaTcVaeStar { beta } => {
            resolved.set("beta", beta)
        }
        LossSpec::AnnealedVae { gamma, c_max, c_steps } => {
            resolved.set("gamma", gamma);
            resolved.set("c_max", c_max);
            resolved.set("c_steps", c_steps);
        }
        LossSpec::InfoVae { lambda } => resolved.set("lambda", lambda),
        LossSpec::PriVae { alpha, beta } => {
            resolved.set("alpha", alpha);
            resolved.set("beta", beta);
        }
        LossSpec::PriVaeStar { alpha, beta, gamma } => {
            resolved.set("alpha", alpha);
            resolved.set("beta", beta);
            resolved.set("gamma", gamma);
        }
    }
    resolved.set("steps", train_cfg.steps);
    resolved.set("batch_size", train_cfg.batch_size);
    resolved.set("learning_rate", train_cfg.learning_rate);
    resolved.set("log_every", train_cfg.log_every);
    resolved.set("seed", seed);
    resolved.set("latent_dim", latent_dim);
    resolved.set("bins", bins);
    resolved.set("smooth_window", smooth_window);
    resolved.set("info_samples", instrument.samples);
    resolved.set("info_batch", instrument.batch);
    resolved.set("info_alpha", instrument.alpha);
    resolved.set("width_multiplier", instrument.width_multiplier);
    resolved.set("out_dir", out_dir.display());
    resolved.write(&out_dir)
}
