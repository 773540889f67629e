//! `privae compare`: merge summaries from completed training runs into
//! one table and overlay their information-plane curves.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::cmd::{ensure_dir, write_file};
use crate::config::CliResult;
use crate::data::read_numeric_csv;
use crate::svg::{lines, LineSeries, PALETTE};

pub struct Args {
    pub out: Option<PathBuf>,
    pub runs: Vec<PathBuf>,
}

struct RunReport {
    name: String,
    summary: BTreeMap<String, String>,
    /// (step, I, T) triples; empty when the run logged nothing.
    curve: Vec<(f64, f64, f64)>,
}

fn read_summary(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut map = BTreeMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    if map.is_empty() {
        return Err(format!("{} has no 'key = value' lines", path.display()));
    }
    Ok(map)
}

fn load_run(dir: &Path) -> Result<RunReport, String> {
    let summary = read_summary(&dir.join("summary.txt"))?;
    let curve = match read_numeric_csv(&dir.join("info_plane.csv")) {
        Ok(table) if table.ncols() >= 3 => table
            .rows()
            .into_iter()
            .map(|r| (r[0], r[1], r[2]))
            .collect(),
        // A header-only CSV (zero-step run) still compares fine; it
        // just contributes no curve.
        _ => Vec::new(),
    };
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Ok(RunReport { name, summary, curve })
}

pub fn run(args: Args) -> CliResult<()> {
    let mut reports = Vec::new();
    for dir in &args.runs {
        match load_run(dir) {
            Ok(r) => reports.push(r),
            Err(e) => eprintln!("warning: skipping {}: {e}", dir.display()),
        }
    }
    if reports.len() < 2 {
        return Err(format!(
            "need at least 2 usable runs to compare, got {}",
            reports.len()
        ));
    }

    let field = |r: &RunReport, key: &str| -> String {
        r.summary.get(key).cloned().unwrap_or_else(|| "n/a".into())
    };
    println!(
        "{:<24} {:<12} {:<14} {:<12}",
        "run", "final_mig", "final_recon", "pearson_i_t"
    );
    let mut csv = String::from("run,final_mig,final_recon,pearson_i_t\n");
    for r in &reports {
        let (m, rec, p) = (
            field(r, "final_mig"),
            field(r, "final_recon"),
            field(r, "pearson_i_t"),
        );
        println!("{:<24} {:<12} {:<14} {:<12}", r.name, m, rec, p);
        csv.push_str(&format!("{},{m},{rec},{p}\n", r.name));
    }

    if let Some(out_dir) = &args.out {
        ensure_dir(out_dir)?;
        write_file(&out_dir.join("compare.csv"), &csv)?;
        let mut series = Vec::new();
        for (i, r) in reports.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            if r.curve.is_empty() {
                continue;
            }
            series.push(LineSeries {
                label: format!("I(x;z) {}", r.name),
                color: color.into(),
                dashed: false,
                points: r.curve.iter().map(|&(s, i_xz, _)| (s, i_xz)).collect(),
            });
            series.push(LineSeries {
                label: format!("T(z) {}", r.name),
                color: color.into(),
                dashed: true,
                points: r.curve.iter().map(|&(s, _, t)| (s, t)).collect(),
            });
        }
        write_file(
            &out_dir.join("compare.svg"),
            &lines("information plane over training", "step", "bits", &series),
        )?;
    }
    Ok(())
}
