use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use sagnac::{Command, Format, LoadedConfig, RunManifest};

/// Simulate and analyze polarization-entangled photon pairs from a Sagnac
/// source: fringes, tomography, rate budgets, crosstalk and self-checks.
#[derive(Debug, Parser)]
#[command(name = "sagnac", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// JSON configuration ("schema": 1); built-in defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,

    /// directory receiving the run directory
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// overrides experiment.seed
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Monte Carlo run count for tomo
    #[arg(long)]
    runs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(p) => LoadedConfig::load(p),
        None => Ok(LoadedConfig::defaults()),
    };
    let result = config.and_then(|config| {
        sagnac::run(&RunManifest {
            command: cli.command,
            config,
            out: cli.out,
            seed: cli.seed,
            format: cli.format,
            runs: cli.runs,
        })
    });
    match result {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            println!("output={}", outcome.dir.display());
            match outcome.failure {
                Some(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
