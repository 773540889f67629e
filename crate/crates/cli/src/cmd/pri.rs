//! `privae pri`: sweep the relevant-information optimizer over a list
//! of gamma values and render one trajectory CSV and one scatter panel
//! per value.

use std::path::PathBuf;

use privae_core::pri::{pri_sweep, PointCloud, PriConfig, PriRun};

use crate::cmd::{ensure_dir, resolve_out, resolve_seed, write_file};
use crate::config::{CliResult, Config, Resolved};
use crate::data::{load_source, parse_source};
use crate::svg::{scatter, ScatterGroup, PALETTE};

pub struct Args {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

const ALLOWED: [&str; 7] = ["data", "gammas", "sigma", "max_iters", "tol", "seed", "out_dir"];

/// Gamma values appear in file names, so format them compactly.
fn gamma_label(g: f64) -> String {
    format!("{g}")
}

fn panel(run: &PriRun, data: &PointCloud, color: &str) -> String {
    let label = gamma_label(run.gamma);
    // 2-D and higher scatter the first two coordinates; 1-D falls back
    // to coordinate against point index.
    let (x_label, y_label, to_points): (_, _, fn(&ndarray::Array2<f64>) -> Vec<(f64, f64)>) =
        if data.points().ncols() >= 2 {
            ("c0", "c1", |m| {
                m.rows().into_iter().map(|r| (r[0], r[1])).collect()
            })
        } else {
            ("point index", "c0", |m| {
                m.rows()
                    .into_iter()
                    .enumerate()
                    .map(|(i, r)| (i as f64, r[0]))
                    .collect()
            })
        };
    scatter(
        &format!("converged cloud at gamma = {label}"),
        x_label,
        y_label,
        &[
            ScatterGroup {
                label: "data".into(),
                color: "#999999".into(),
                points: to_points(&data.points().to_owned()),
            },
            ScatterGroup {
                label: format!("gamma = {label}"),
                color: color.into(),
                points: to_points(&run.cloud.points().to_owned()),
            },
        ],
    )
}

pub fn run(args: Args) -> CliResult<()> {
    let cfg = Config::load(&args.config)?;
    cfg.check_keys(&ALLOWED)?;
    let seed = resolve_seed(args.seed, &cfg)?;
    let out_dir = resolve_out(args.out, &cfg)?;
    let source = parse_source(cfg.require("data")?)?;
    let data = load_source(&source, seed)?;
    let gammas = cfg.f64_list("gammas")?;

    let cloud = PointCloud::new(data).map_err(|e| e.to_string())?;
    let mut pri_cfg =
        PriConfig::for_data(0.0, cloud.points()).map_err(|e| format!("cannot derive kernel width: {e}"))?;
    if let Some(sigma) = cfg.f64_opt("sigma")? {
        pri_cfg.sigma = sigma;
    }
    if let Some(tol) = cfg.f64_opt("tol")? {
        pri_cfg.tol = tol;
    }
    pri_cfg.max_iters = cfg.usize_or("max_iters", pri_cfg.max_iters)?;

    let runs = pri_sweep(&cloud, &gammas, &pri_cfg, seed).map_err(|e| e.to_string())?;

    ensure_dir(&out_dir)?;
    for (i, run) in runs.iter().enumerate() {
        let label = gamma_label(run.gamma);
        let mut csv = Vec::new();
        privae_core::pri::write_trajectory_csv(&mut csv, run).map_err(|e| e.to_string())?;
        write_file(
            &out_dir.join(format!("trajectory_gamma_{label}.csv")),
            &String::from_utf8(csv).expect("csv is utf-8"),
        )?;
        write_file(
            &out_dir.join(format!("panel_gamma_{label}.svg")),
            &panel(run, &cloud, PALETTE[i % PALETTE.len()]),
        )?;
        println!(
            "gamma {label}: {} iterations, objective {} -> {}",
            run.cloud.generation(),
            run.objectives[0],
            run.objectives.last().expect("trace is never empty")
        );
    }

    let mut resolved = Resolved::new();
    resolved.set("data", cfg.require("data")?);
    resolved.set(
        "gammas",
        gammas
            .iter()
            .map(|g| gamma_label(*g))
            .collect::<Vec<_>>()
            .join(", "),
    );
    resolved.set("sigma", pri_cfg.sigma);
    resolved.set("max_iters", pri_cfg.max_iters);
    resolved.set("tol", pri_cfg.tol);
    resolved.set("seed", seed);
    resolved.set("out_dir", out_dir.display());
    resolved.write(&out_dir)
}
