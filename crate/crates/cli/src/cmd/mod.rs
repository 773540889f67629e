//! One module per subcommand. Each takes parsed flags plus a flat
//! config, validates its own key vocabulary, and writes a run
//! directory with a `config.resolved` snapshot beside the outputs.

pub mod compare;
pub mod estimate;
pub mod pri;
pub mod train;

use std::path::{Path, PathBuf};

use crate::config::{CliResult, Config};

/// Output directory resolution: the --out flag wins, then the config's
/// `out_dir` key.
pub fn resolve_out(flag: Option<PathBuf>, cfg: &Config) -> CliResult<PathBuf> {
    flag.or_else(|| cfg.get("out_dir").map(PathBuf::from))
        .ok_or("no output directory: pass --out or set out_dir in the config".into())
}

/// Seed resolution: the --seed flag wins, then the config's `seed`
/// key, then 0.
pub fn resolve_seed(flag: Option<u64>, cfg: &Config) -> CliResult<u64> {
    Ok(match flag {
        Some(s) => s,
        None => cfg.u64_opt("seed")?.unwrap_or(0),
    })
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
