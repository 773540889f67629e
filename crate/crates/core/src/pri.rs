//! Relevant-information structure extraction on point clouds.
//!
//! A movable cloud Y is fit against fixed data X by minimizing
//! `J(Y) = -(1-γ)·log IP(Y) - 2γ·log CIP(Y, X)`, where
//! `IP = (1/M²)·ΣΣ G_{σ√2}(yᵢ-yⱼ)` is the information potential of Y,
//! `CIP = (1/MN)·ΣΣ G_{σ√2}(yᵢ-xⱼ)` the cross information potential,
//! and G a Gaussian kernel. The weight γ trades compression against
//! fidelity: 0 collapses the cloud to a single point, 1 is exactly
//! mean shift onto the modes of X's Parzen density, intermediate
//! values trace curve- and surface-like skeletons, and large γ gives
//! the data back.
//!
//! The fixed-point update is the stationarity condition of J, a
//! relevance-weighted mean shift. Each step is damped by a
//! backtracking line search so the recorded objective never increases;
//! if no step length helps, the cloud is returned unchanged and the
//! displacement test reads that as converged. A plain gradient-descent
//! mode exists as a cross-check.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::gram::{pairwise_sq_dists, KernelSpec};
use crate::rng::{normal_vec, stream, Stream};
use crate::{Error, Result};

/// Longest step is tried first, then halved this many times before the
/// search gives up and reports a stationary cloud.
const MAX_HALVINGS: u32 = 30;
/// A candidate is accepted when its objective is below the current one
/// plus this slack, which absorbs roundoff at a converged fixed point.
const ACCEPT_SLACK: f64 = 1e-12;

/// How one iteration moves the cloud.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepMode {
    /// Damped stationarity update (the weighted mean shift).
    FixedPoint,
    /// `y ← y − step·∇J(y)` with the analytic gradient, undamped.
    GradientDescent { step: f64 },
}

/// Optimizer settings. `tol` is compared against the mean per-point
/// displacement of one step, so it lives on the data's length scale.
#[derive(Clone, Debug)]
pub struct PriConfig {
    pub gamma: f64,
    pub sigma: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub mode: StepMode,
}

impl PriConfig {
    /// Fixed-point config with the stock iteration budget. The caller
    /// picks `sigma` and `tol`; see [`PriConfig::for_data`] for the
    /// data-derived defaults.
    pub fn new(gamma: f64, sigma: f64, tol: f64) -> Self {
        PriConfig {
            gamma,
            sigma,
            max_iters: 500,
            tol,
            mode: StepMode::FixedPoint,
        }
    }

    /// Derives `sigma` from the median pairwise distance of `data` and
    /// `tol` as 1e-6 of the mean coordinate magnitude.
    pub fn for_data(gamma: f64, data: ArrayView2<f64>) -> Result<Self> {
        let sigma = KernelSpec::median().resolve(data)?;
        let scale = data.iter().map(|v| v.abs()).sum::<f64>() / data.len() as f64;
        Ok(Self::new(gamma, sigma, 1e-6 * scale))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "pri gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "pri sigma must be finite and > 0, got {}",
                self.sigma
            )));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "pri tol must be finite and > 0, got {}",
                self.tol
            )));
        }
        if let StepMode::GradientDescent { step } = self.mode {
            if !(step > 0.0) || !step.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "gradient-descent step must be finite and > 0, got {step}"
                )));
            }
        }
        Ok(())
    }
}

/// An M×D set of points plus a counter of optimization steps applied.
#[derive(Clone, Debug)]
pub struct PointCloud {
    points: Array2<f64>,
    generation: usize,
}

impl PointCloud {
    /// Wraps a matrix of row points. Rejects empty clouds and
    /// non-finite coordinates; M = 1 and D = 1 are both fine.
    pub fn new(points: Array2<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "point cloud needs at least one point and one coordinate, got {}x{}",
                points.nrows(),
                points.ncols()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point cloud coordinates".into()));
        }
        Ok(PointCloud {
            points,
            generation: 0,
        })
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn into_points(self) -> Array2<f64> {
        self.points
    }
}

/// Squared distances between every row of `a` and every row of `b`.
/// Rows are independent, so they fill in parallel; the output layout
/// is fixed, keeping results identical at any thread count.
fn cross_sq_dists(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let (m, n) = (a.nrows(), b.nrows());
    let data: Vec<f64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            let row = a.row(i);
            b.rows()
                .into_iter()
                .map(|other| {
                    row.iter()
                        .zip(other.iter())
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum::<f64>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Array2::from_shape_vec((m, n), data).expect("row-major fill matches the shape")
}

struct Potentials {
    gyy: Array2<f64>,
    gyx: Array2<f64>,
    ip: f64,
    cip: f64,
}

/// Kernel matrices and their means. The kernel width is σ√2, so the
/// exponent is −d²/(4σ²).
fn potentials(y: ArrayView2<f64>, x: ArrayView2<f64>, sigma: f64) -> Potentials {
    let inv = 1.0 / (4.0 * sigma * sigma);
    let gyy = pairwise_sq_dists(y).mapv(|d2| (-d2 * inv).exp());
    let gyx = cross_sq_dists(y, x).mapv(|d2| (-d2 * inv).exp());
    let ip = gyy.mean().expect("cloud is nonempty");
    let cip = gyx.mean().expect("clouds are nonempty");
    Potentials { gyy, gyx, ip, cip }
}

/// J from precomputed potential means. Terms with zero weight are
/// skipped so γ = 0 never touches CIP and γ = 1 never touches IP.
fn objective_from(ip: f64, cip: f64, gamma: f64, sigma: f64) -> Result<f64> {
    let mut j = 0.0;
    if gamma != 1.0 {
        if ip <= 0.0 || !ip.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "information potential underflowed to {ip} at sigma = {sigma}; increase sigma"
            )));
        }
        j -= (1.0 - gamma) * ip.ln();
    }
    if gamma != 0.0 {
        if cip <= 0.0 || !cip.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cross information potential underflowed to {cip} at sigma = {sigma}; increase sigma"
            )));
        }
        j -= 2.0 * gamma * cip.ln();
    }
    Ok(j)
}

fn check_dims(y: &PointCloud, x: &PointCloud) -> Result<()> {
    if y.points.ncols() != x.points.ncols() {
        return Err(Error::ShapeMismatch {
            op: "pri cloud dimensions",
            lhs: y.points.shape().to_vec(),
            rhs: x.points.shape().to_vec(),
        });
    }
    Ok(())
}

/// The objective `J(Y) = -(1-γ)·log IP(Y) - 2γ·log CIP(Y, X)`.
pub fn pri_objective(y: &PointCloud, x: &PointCloud, cfg: &PriConfig) -> Result<f64> {
    cfg.validate()?;
    check_dims(y, x)?;
    let p = potentials(y.points(), x.points(), cfg.sigma);
    objective_from(p.ip, p.cip, cfg.gamma, cfg.sigma)
}

/// Analytic `∂J/∂Y`, an M×D matrix. Matches finite differences of
/// [`pri_objective`] to better than 1e-5 relative error.
pub fn pri_gradient(y: &PointCloud, x: &PointCloud, cfg: &PriConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    check_dims(y, x)?;
    let p = potentials(y.points(), x.points(), cfg.sigma);
    objective_from(p.ip, p.cip, cfg.gamma, cfg.sigma)?;
    let (m, n) = (y.points.nrows() as f64, x.points.nrows() as f64);
    let sig2 = cfg.sigma * cfg.sigma;
    let mut grad = Array2::zeros(y.points.raw_dim());
    if cfg.gamma != 1.0 {
        // d(-(1-γ)·log IP)/dyₖ; the factor 2 counts yₖ's row and column.
        let c = (1.0 - cfg.gamma) / (p.ip * m * m * sig2);
        let row_sums = p.gyy.sum_axis(Axis(1));
        let pulled = p.gyy.dot(&y.points);
        let term = &y.points * &row_sums.insert_axis(Axis(1)) - pulled;
        grad.scaled_add(c, &term);
    }
    if cfg.gamma != 0.0 {
        let c = cfg.gamma / (p.cip * m * n * sig2);
        let row_sums = p.gyx.sum_axis(Axis(1));
        let pulled = p.gyx.dot(&x.points);
        let term = &y.points * &row_sums.insert_axis(Axis(1)) - pulled;
        grad.scaled_add(c, &term);
    }
    Ok(grad)
}

/// One damped fixed-point step: the stationarity target plus a
/// backtracking line search on J. Returns the new points and their
/// objective; an exhausted search returns the input unchanged.
fn fixed_point_step(
    y: ArrayView2<f64>,
    x: ArrayView2<f64>,
    cfg: &PriConfig,
) -> Result<(Array2<f64>, f64)> {
    let p = potentials(y, x, cfg.sigma);
    let j0 = objective_from(p.ip, p.cip, cfg.gamma, cfg.sigma)?;
    let (m, n) = (y.nrows() as f64, x.nrows() as f64);
    // Stationarity of J: wy·Σᵢ G(yₖ-yᵢ)(yᵢ-yₖ) + wx·Σⱼ G(yₖ-xⱼ)(xⱼ-yₖ) = 0,
    // with the common positive factor 2/(M·2σ²) divided out.
    let wy = if cfg.gamma == 1.0 {
        0.0
    } else {
        (1.0 - cfg.gamma) / (m * p.ip)
    };
    let wx = if cfg.gamma == 0.0 {
        0.0
    } else {
        cfg.gamma / (n * p.cip)
    };
    let mut num = p.gyy.dot(&y) * wy;
    num.scaled_add(wx, &p.gyx.dot(&x));
    let den: Array1<f64> = p.gyy.sum_axis(Axis(1)) * wy + p.gyx.sum_axis(Axis(1)) * wx;
    for (k, d) in den.iter().enumerate() {
        if !d.is_finite() || d.abs() < 1e-300 {
            return Err(Error::InvalidArgument(format!(
                "fixed-point denominator vanished for point {k} at sigma = {}; increase sigma",
                cfg.sigma
            )));
        }
    }
    let target = num / &den.insert_axis(Axis(1));
    let mut eta = 1.0;
    for _ in 0..=MAX_HALVINGS {
        // At η = 1 take the target verbatim, keeping γ = 1 bit-exact
        // mean shift instead of y + 1.0·(t − y).
        let candidate = if eta == 1.0 {
            target.clone()
        } else {
            &y.to_owned() + &((&target - &y) * eta)
        };
        if candidate.iter().all(|v| v.is_finite()) {
            let pc = potentials(candidate.view(), x, cfg.sigma);
            if let Ok(j) = objective_from(pc.ip, pc.cip, cfg.gamma, cfg.sigma) {
                if j <= j0 + ACCEPT_SLACK {
                    return Ok((candidate, j));
                }
            }
        }
        eta *= 0.5;
    }
    Ok((y.to_owned(), j0))
}

fn gradient_step(
    y: ArrayView2<f64>,
    x: ArrayView2<f64>,
    cfg: &PriConfig,
    step: f64,
) -> Result<(Array2<f64>, f64)> {
    let holder = PointCloud {
        points: y.to_owned(),
        generation: 0,
    };
    let xc = PointCloud {
        points: x.to_owned(),
        generation: 0,
    };
    let grad = pri_gradient(&holder, &xc, cfg)?;
    let mut next = y.to_owned();
    next.scaled_add(-step, &grad);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient-descent update".into()));
    }
    let p = potentials(next.view(), x, cfg.sigma);
    let j = objective_from(p.ip, p.cip, cfg.gamma, cfg.sigma)?;
    Ok((next, j))
}

/// Advances the cloud by one iteration in the configured mode.
pub fn pri_step(y: &PointCloud, x: &PointCloud, cfg: &PriConfig) -> Result<PointCloud> {
    cfg.validate()?;
    check_dims(y, x)?;
    let (points, _) = match cfg.mode {
        StepMode::FixedPoint => fixed_point_step(y.points(), x.points(), cfg)?,
        StepMode::GradientDescent { step } => gradient_step(y.points(), x.points(), cfg, step)?,
    };
    Ok(PointCloud {
        points,
        generation: y.generation + 1,
    })
}

/// One optimization trace: the objective and cloud after every
/// accepted step, index 0 being the start.
#[derive(Clone, Debug)]
pub struct PriRun {
    pub gamma: f64,
    pub objectives: Vec<f64>,
    pub snapshots: Vec<Array2<f64>>,
    pub cloud: PointCloud,
}

/// Iterates [`pri_step`] from `y0` until the mean point displacement
/// drops below `cfg.tol` or `cfg.max_iters` steps have run.
pub fn pri_converge(y0: PointCloud, x: &PointCloud, cfg: &PriConfig) -> Result<PriRun> {
    cfg.validate()?;
    check_dims(&y0, x)?;
    let mut current = y0.points;
    let mut generation = y0.generation;
    let j0 = {
        let p = potentials(current.view(), x.points(), cfg.sigma);
        objective_from(p.ip, p.cip, cfg.gamma, cfg.sigma)?
    };
    let mut objectives = vec![j0];
    let mut snapshots = vec![current.clone()];
    for _ in 0..cfg.max_iters {
        let (next, j) = match cfg.mode {
            StepMode::FixedPoint => fixed_point_step(current.view(), x.points(), cfg)?,
            StepMode::GradientDescent { step } => {
                gradient_step(current.view(), x.points(), cfg, step)?
            }
        };
        let displacement = (&next - &current)
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum::<f64>()
            / next.nrows() as f64;
        objectives.push(j);
        snapshots.push(next.clone());
        current = next;
        generation += 1;
        if displacement < cfg.tol {
            break;
        }
    }
    Ok(PriRun {
        gamma: cfg.gamma,
        objectives,
        snapshots,
        cloud: PointCloud {
            points: current,
            generation,
        },
    })
}

/// Runs one convergence per γ, all from the same jittered start
/// `Y⁰ = X + N(0, (σ/10)²)`. Whatever `cfg.gamma` holds is replaced by
/// each entry of `gammas` in turn.
pub fn pri_sweep(
    x: &PointCloud,
    gammas: &[f64],
    cfg: &PriConfig,
    seed: u64,
) -> Result<Vec<PriRun>> {
    cfg.validate()?;
    if gammas.is_empty() {
        return Err(Error::InvalidArgument(
            "pri sweep needs at least one gamma".into(),
        ));
    }
    let mut rng = stream(seed, Stream::CloudJitter);
    let noise = Array2::from_shape_vec(
        x.points.raw_dim(),
        normal_vec(&mut rng, x.points.len()),
    )
    .expect("noise shape matches the data");
    let y0 = &x.points + &(noise * (cfg.sigma / 10.0));
    let mut runs = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let mut per_gamma = cfg.clone();
        per_gamma.gamma = gamma;
        let start = PointCloud {
            points: y0.clone(),
            generation: 0,
        };
        runs.push(pri_converge(start, x, &per_gamma)?);
    }
    Ok(runs)
}

/// Writes a run as CSV rows `iter,point_id,c0..c{D-1},objective`; the
/// objective repeats across the rows of one iteration.
pub fn write_trajectory_csv<W: std::io::Write>(out: &mut W, run: &PriRun) -> Result<()> {
    let dims = run.snapshots[0].ncols();
    let coord_names: Vec<String> = (0..dims).map(|d| format!("c{d}")).collect();
    writeln!(out, "iter,point_id,{},objective", coord_names.join(","))?;
    for (iter, (cloud, objective)) in run.snapshots.iter().zip(&run.objectives).enumerate() {
        for (point_id, row) in cloud.rows().into_iter().enumerate() {
            let coords: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{iter},{point_id},{},{objective}", coords.join(","))?;
        }
    }
    Ok(())
}
