//! The `privae` binary: train, pri, estimate, and compare subcommands
//! over flat key = value configs. All randomness flows from one seed;
//! PRIVAE_THREADS caps the worker pool used for kernel matrices.

mod cmd;
mod config;
mod data;
mod svg;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "privae",
    version,
    about = "Desk-scale information-theoretic learning: VAE training with \
             information-plane logging, relevant-information point-cloud sweeps, \
             and entropy estimator cross-checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a VAE on the built-in factor grid and log the information plane
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's out_dir)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run seed (overrides the config's seed)
        #[arg(long)]
        seed: Option<u64>,
        /// Run loss settings that validation would otherwise reject
        #[arg(long)]
        force: bool,
    },
    /// Sweep the relevant-information optimizer over a gamma list
    Pri {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate entropy, mutual information, or total correlation
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge summaries of two or more completed runs
    Compare {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run directories produced by `privae train`
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("PRIVAE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or(format!("PRIVAE_THREADS must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot size the thread pool: {e}"))
}

fn main() {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Train { config, out, seed, force } => {
            cmd::train::run(cmd::train::Args { config, out, seed, force })
        }
        Command::Pri { config, out, seed } => cmd::pri::run(cmd::pri::Args { config, out, seed }),
        Command::Estimate { config, out } => cmd::estimate::run(cmd::estimate::Args { config, out }),
        Command::Compare { out, runs } => cmd::compare::run(cmd::compare::Args { out, runs }),
    });
    if let Err(message) = result {
        eprintln!("error: {message}");
        std::process::exit(1);
    }
}
