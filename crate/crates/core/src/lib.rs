//! Information-theoretic learning at desk scale.
//!
//! The crate has three layers.
//!
//! * Estimation: kernel Gram algebra ([`gram`]), matrix-based Rényi
//!   α-entropy with joint entropy, mutual information and total
//!   correlation ([`renyi`]), plus kNN and KDE baselines ([`classic`]).
//! * Optimization: a reverse-mode autodiff graph ([`graph`]) feeding a
//!   Gaussian-encoder / Bernoulli-decoder VAE with eight objectives
//!   ([`vae`]), and a standalone relevant-information point-cloud
//!   optimizer ([`pri`]).
//! * Measurement: a procedural factor-grid image dataset ([`dataset`])
//!   and disentanglement / time-series metrics ([`metrics`]).
//!
//! Everything is double precision and deterministic: all randomness
//! flows from explicit seeds through counter-mode generators.

pub mod classic;
pub mod dataset;
pub mod gram;
pub mod metrics;
pub mod graph;
pub mod pri;
pub mod renyi;
pub mod rng;
pub mod vae;

/// Library-wide error type. Variants carry enough context to act on the
/// failure without re-deriving it from the call site.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error("kernel width rule {rule} degenerated: {reason}")]
    DegenerateWidth { rule: String, reason: String },
    #[error("training diverged at step {step}; last good record index {last_good}")]
    Diverged { step: usize, last_good: usize },
    #[error("loss term {0} is NaN")]
    NanTerm(&'static str),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Checkpoint(String),
    #[error(
        "pri_vae regime: alpha = {alpha} >= beta = {beta} does not converge; \
         pass force=true to run it anyway"
    )]
    PriVaeRegime { alpha: f64, beta: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
