//! Data sources for the pri and estimate commands: tiny built-in
//! generators plus a permissive rectangular CSV reader.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use privae_core::dataset::FactorGrid;
use privae_core::rng::{normal, normal_vec, stream, Stream};

use crate::config::CliResult;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    FactorGrid,
    Gaussian { n: usize, d: usize },
    TwoMoons { n: usize },
    Csv(PathBuf),
}

/// `factor_grid`, `gaussian:<n>x<d>`, `two_moons:<n>`, or a .csv path.
pub fn parse_source(spec: &str) -> CliResult<DataSource> {
    if spec == "factor_grid" {
        return Ok(DataSource::FactorGrid);
    }
    if let Some(dims) = spec.strip_prefix("gaussian:") {
        let (n, d) = dims
            .split_once('x')
            .ok_or(format!("gaussian source expects gaussian:<n>x<d>, got '{spec}'"))?;
        let n = n.parse().map_err(|_| format!("bad sample count in '{spec}'"))?;
        let d = d.parse().map_err(|_| format!("bad dimension in '{spec}'"))?;
        return Ok(DataSource::Gaussian { n, d });
    }
    if let Some(n) = spec.strip_prefix("two_moons:") {
        let n = n.parse().map_err(|_| format!("bad sample count in '{spec}'"))?;
        return Ok(DataSource::TwoMoons { n });
    }
    if spec.ends_with(".csv") {
        return Ok(DataSource::Csv(PathBuf::from(spec)));
    }
    Err(format!(
        "unknown data source '{spec}' (expected factor_grid, gaussian:<n>x<d>, two_moons:<n>, or a .csv path)"
    ))
}

pub fn load_source(source: &DataSource, seed: u64) -> CliResult<Array2<f64>> {
    match source {
        DataSource::FactorGrid => Ok(FactorGrid::full().images),
        DataSource::Gaussian { n, d } => {
            if *n == 0 || *d == 0 {
                return Err("gaussian source needs n >= 1 and d >= 1".into());
            }
            let mut rng = stream(seed, Stream::Data);
            Ok(Array2::from_shape_vec((*n, *d), normal_vec(&mut rng, n * d))
                .expect("shape matches draw count"))
        }
        DataSource::TwoMoons { n } => Ok(two_moons(*n, seed)),
        DataSource::Csv(path) => read_numeric_csv(path),
    }
}

/// Two interleaved half circles with light Gaussian noise, the stock
/// nonconvex clustering shape.
fn two_moons(n: usize, seed: u64) -> Array2<f64> {
    let mut rng = stream(seed, Stream::Data);
    let mut out = Array2::zeros((n, 2));
    let per_moon = n.div_ceil(2).max(1);
    for i in 0..n {
        let moon = i % 2;
        let t = std::f64::consts::PI * ((i / 2) as f64 + 0.5) / per_moon as f64;
        let (cx, cy) = if moon == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        out[[i, 0]] = cx + 0.05 * normal(&mut rng);
        out[[i, 1]] = cy + 0.05 * normal(&mut rng);
    }
    out
}

/// Reads a rectangular numeric CSV. A first line that fails to parse
/// is treated as a header; every later parse failure is an error with
/// its line number.
pub fn read_numeric_csv(path: &Path) -> CliResult<Array2<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse()).collect();
        match parsed {
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(format!(
                    "{} line {}: non-numeric field in '{line}'",
                    path.display(),
                    i + 1
                ))
            }
            Ok(row) => {
                let w = *width.get_or_insert(row.len());
                if row.len() != w {
                    return Err(format!(
                        "{} line {}: expected {w} columns, got {}",
                        path.display(),
                        i + 1,
                        row.len()
                    ));
                }
                rows.push(row);
            }
        }
    }
    if rows.is_empty() {
        return Err(format!("{}: no numeric rows", path.display()));
    }
    let (n, d) = (rows.len(), rows[0].len());
    Ok(Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect())
        .expect("rows are rectangular"))
}
