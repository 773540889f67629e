//! `privae estimate`: entropy, mutual information, or total
//! correlation of CSV (or generated) data, via the Gram-based Rényi
//! estimator or the kNN/KDE baselines.

use std::path::PathBuf;

use ndarray::{ArrayView2, Axis};
use privae_core::classic::{classic_total_correlation, kde_entropy, knn_entropy, ClassicEstimator};
use privae_core::gram::{gram, KernelSpec, NormalizedGram};
use privae_core::renyi::{entropy, mutual_information, total_correlation};
use privae_core::Error;

use crate::cmd::{ensure_dir, write_file};
use crate::config::{CliResult, Config, Resolved};
use crate::data::{load_source, parse_source};

pub struct Args {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
}

const ALLOWED: [&str; 9] = [
    "data",
    "data_b",
    "quantity",
    "estimator",
    "alphas",
    "width_rule",
    "k",
    "seed",
    "out_dir",
];

fn parse_width_rule(s: &str) -> CliResult<KernelSpec> {
    if s == "median" {
        return Ok(KernelSpec::median());
    }
    if s == "silverman" {
        return Ok(KernelSpec::silverman());
    }
    if let Some(v) = s.strip_prefix("fixed:") {
        let sigma: f64 = v
            .parse()
            .map_err(|_| format!("bad width in 'fixed:{v}'"))?;
        return Ok(KernelSpec::fixed(sigma));
    }
    if let Some(v) = s.strip_prefix("median_scaled:") {
        let c: f64 = v
            .parse()
            .map_err(|_| format!("bad multiplier in 'median_scaled:{v}'"))?;
        return Ok(KernelSpec::median_scaled(c));
    }
    Err(format!(
        "unknown width_rule '{s}' (expected median, silverman, fixed:<sigma>, median_scaled:<c>)"
    ))
}

/// Gram with a constant-data fallback: if the width rule degenerates
/// (all points identical), any fixed width gives the same all-ones
/// Gram, whose entropy is exactly zero.
fn gram_of(data: ArrayView2<f64>, rule: &KernelSpec) -> CliResult<NormalizedGram> {
    match gram(data, rule) {
        Err(Error::DegenerateWidth { .. }) => {
            gram(data, &KernelSpec::fixed(1.0)).map_err(|e| e.to_string())
        }
        other => other.map_err(|e| e.to_string()),
    }
}

struct Row {
    quantity: &'static str,
    estimator: &'static str,
    alpha: Option<f64>,
    value: f64,
    units: &'static str,
}

pub fn run(args: Args) -> CliResult<()> {
    let cfg = Config::load(&args.config)?;
    cfg.check_keys(&ALLOWED)?;
    let seed = cfg.u64_opt("seed")?.unwrap_or(0);
    let quantity = cfg.require("quantity")?;
    let estimator = cfg.require("estimator")?;
    let rule = parse_width_rule(cfg.get("width_rule").unwrap_or("median"))?;
    let k = cfg.usize_or("k", 3)?;
    let alphas = match cfg.get("alphas") {
        Some(_) => cfg.f64_list("alphas")?,
        None => vec![1.01],
    };
    if estimator != "renyi" && cfg.get("alphas").is_some() {
        return Err("key 'alphas' only applies to estimator = renyi".into());
    }

    let a = load_source(&parse_source(cfg.require("data")?)?, seed)?;
    let b = match cfg.get("data_b") {
        Some(spec) => {
            if quantity != "mi" {
                return Err("key 'data_b' only applies to quantity = mi".into());
            }
            Some(load_source(&parse_source(spec)?, seed.wrapping_add(1))?)
        }
        None => None,
    };

    let rows = match (quantity, estimator) {
        ("entropy", "renyi") => alphas
            .iter()
            .map(|&alpha| {
                let g = gram_of(a.view(), &rule)?;
                let e = entropy(&g, alpha).map_err(|e| e.to_string())?;
                Ok(Row { quantity: "entropy", estimator: "renyi", alpha: Some(alpha), value: e.bits, units: "bits" })
            })
            .collect::<CliResult<Vec<_>>>()?,
        ("entropy", "knn") => vec![Row {
            quantity: "entropy",
            estimator: "knn",
            alpha: None,
            value: knn_entropy(a.view(), k).map_err(|e| e.to_string())?,
            units: "nats",
        }],
        ("entropy", "kde") => vec![Row {
            quantity: "entropy",
            estimator: "kde",
            alpha: None,
            value: kde_entropy(a.view(), &rule).map_err(|e| e.to_string())?,
            units: "nats",
        }],
        ("mi", est) => {
            let b = b.ok_or("quantity = mi requires key 'data_b'")?;
            if a.nrows() != b.nrows() {
                return Err(format!(
                    "mismatched row counts for mi: data has {} rows, data_b has {}",
                    a.nrows(),
                    b.nrows()
                ));
            }
            match est {
                "renyi" => alphas
                    .iter()
                    .map(|&alpha| {
                        let ga = gram_of(a.view(), &rule)?;
                        let gb = gram_of(b.view(), &rule)?;
                        let v = mutual_information(&ga, &gb, alpha).map_err(|e| e.to_string())?;
                        Ok(Row { quantity: "mi", estimator: "renyi", alpha: Some(alpha), value: v, units: "bits" })
                    })
                    .collect::<CliResult<Vec<_>>>()?,
                "knn" | "kde" => {
                    let joint = ndarray::concatenate(Axis(1), &[a.view(), b.view()])
                        .expect("row counts were checked");
                    let h = |m: ArrayView2<f64>| -> CliResult<f64> {
                        if est == "knn" {
                            knn_entropy(m, k).map_err(|e| e.to_string())
                        } else {
                            kde_entropy(m, &rule).map_err(|e| e.to_string())
                        }
                    };
                    let v = h(a.view())? + h(b.view())? - h(joint.view())?;
                    vec![Row {
                        quantity: "mi",
                        estimator: if est == "knn" { "knn" } else { "kde" },
                        alpha: None,
                        value: v,
                        units: "nats",
                    }]
                }
                other => return Err(format!("unknown estimator '{other}' (expected renyi, knn, kde)")),
            }
        }
        ("tc", "renyi") => alphas
            .iter()
            .map(|&alpha| {
                let grams = a
                    .columns()
                    .into_iter()
                    .map(|col| gram_of(col.insert_axis(Axis(1)), &rule))
                    .collect::<CliResult<Vec<_>>>()?;
                let v = total_correlation(&grams, alpha).map_err(|e| e.to_string())?;
                Ok(Row { quantity: "tc", estimator: "renyi", alpha: Some(alpha), value: v, units: "bits" })
            })
            .collect::<CliResult<Vec<_>>>()?,
        ("tc", "knn") => vec![Row {
            quantity: "tc",
            estimator: "knn",
            alpha: None,
            value: classic_total_correlation(a.view(), ClassicEstimator::Knn { k })
                .map_err(|e| e.to_string())?,
            units: "nats",
        }],
        ("tc", "kde") => vec![Row {
            quantity: "tc",
            estimator: "kde",
            alpha: None,
            value: classic_total_correlation(a.view(), ClassicEstimator::Kde)
                .map_err(|e| e.to_string())?,
            units: "nats",
        }],
        (q, "renyi") | (q, "knn") | (q, "kde") => {
            return Err(format!("unknown quantity '{q}' (expected entropy, mi, tc)"))
        }
        (_, e) => return Err(format!("unknown estimator '{e}' (expected renyi, knn, kde)")),
    };

    println!("{:<10} {:<10} {:<7} {:<18} units", "quantity", "estimator", "alpha", "value");
    let mut csv = String::from("quantity,estimator,alpha,value,units\n");
    for row in &rows {
        let alpha = row.alpha.map(|a| format!("{a}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<10} {:<10} {:<7} {:<18} {}",
            row.quantity, row.estimator, alpha, row.value, row.units
        );
        let alpha_csv = row.alpha.map(|a| format!("{a}")).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{alpha_csv},{},{}\n",
            row.quantity, row.estimator, row.value, row.units
        ));
    }

    if let Some(out_dir) = args.out.or_else(|| cfg.get("out_dir").map(PathBuf::from)) {
        ensure_dir(&out_dir)?;
        write_file(&out_dir.join("estimates.csv"), &csv)?;
        let mut resolved = Resolved::new();
        resolved.set("data", cfg.require("data")?);
        if let Some(b) = cfg.get("data_b") {
            resolved.set("data_b", b);
        }
        resolved.set("quantity", quantity);
        resolved.set("estimator", estimator);
        if estimator == "renyi" {
            resolved.set(
                "alphas",
                alphas.iter().map(|a| format!("{a}")).collect::<Vec<_>>().join(", "),
            );
        }
        resolved.set("width_rule", cfg.get("width_rule").unwrap_or("median"));
        resolved.set("k", k);
        resolved.set("seed", seed);
        resolved.set("out_dir", out_dir.display());
        resolved.write(&out_dir)?;
    }
    Ok(())
}
