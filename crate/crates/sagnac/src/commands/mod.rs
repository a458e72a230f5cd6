//! The five CLI commands. Each writes its files into a fresh run directory
//! and returns a key-value summary for the terminal.

mod crosstalk;
mod fringe;
mod rates;
mod tomo;
mod validate;

use std::path::PathBuf;

use rayon::prelude::*;

use sagnac_core::simulator::{simulate_partition, Analyzer, ExperimentConfig, RunLayout, SimResult};

use crate::config::LoadedConfig;
use crate::error::{Context, Error, Result};
use crate::output::{run_id, Format, RunDir};

pub use validate::Check;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Fringe,
    Tomo,
    Rates,
    Crosstalk,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fringe => "fringe",
            Command::Tomo => "tomo",
            Command::Rates => "rates",
            Command::Crosstalk => "crosstalk",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: Command,
    pub config: LoadedConfig,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub format: Format,
    /// Monte Carlo run count override
    pub runs: Option<usize>,
}

#[derive(Debug)]
pub struct Outcome {
    pub dir: PathBuf,
    /// `key=value` lines, also what goes to stdout
    pub summary: String,
    /// set when `validate` found failing checks
    pub failure: Option<Error>,
}

pub fn run(manifest: &RunManifest) -> Result<Outcome> {
    let seed = manifest.config.seed(manifest.seed);
    let id = run_id(manifest.command.name(), seed, &manifest.config.file);
    // config problems surface before anything is written
    match manifest.command {
        Command::Rates => {}
        _ => {
            manifest.config.experiment(manifest.seed)?;
        }
    }
    let mut dir = RunDir::create(&manifest.out, id, manifest.format)?;
    let result = match manifest.command {
        Command::Fringe => fringe::run(manifest, &mut dir).map(|s| (s, None)),
        Command::Tomo => tomo::run(manifest, &mut dir).map(|s| (s, None)),
        Command::Rates => rates::run(manifest, &mut dir).map(|s| (s, None)),
        Command::Crosstalk => crosstalk::run(manifest, &mut dir).map(|s| (s, None)),
        Command::Validate => validate::run(manifest, &mut dir),
    };
    let (summary, failure) = match result {
        Ok(r) => r,
        Err(e) => {
            // only succeeds when nothing was written
            let _ = std::fs::remove_dir(&dir.dir);
            return Err(e);
        }
    };
    let dir = dir.finish(manifest.command.name(), seed, manifest.config.path.as_deref())?;
    Ok(Outcome { dir, summary, failure })
}

/// One setting block with its partitions simulated in parallel and merged in
/// index order, so the result does not depend on the thread count.
pub(crate) fn simulate_block(
    config: &ExperimentConfig,
    analyzers: &[Analyzer],
    n_fold: usize,
    layout: RunLayout,
) -> Result<SimResult> {
    let parts: Vec<SimResult> = (0..layout.partitions)
        .into_par_iter()
        .map(|i| simulate_partition(config, analyzers, n_fold, layout, i))
        .collect::<sagnac_core::Result<_>>()
        .context("simulation")?;
    let mut parts = parts.into_iter();
    let mut total = parts.next().expect("at least one partition");
    for p in parts {
        total.merge(&p).context("simulation")?;
    }
    Ok(total)
}
