use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use radinv_cli::{parse_config, run, Command};

/// Radiativity-coefficient reconstruction experiments.
#[derive(Debug, Parser)]
#[command(name = "radinv", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,

    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Noise and sampling seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for parallel sweeps.
    #[arg(long)]
    jobs: Option<usize>,
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = parse_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli
        .out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("radinv-out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        anyhow::ensure!(jobs > 0, "--jobs must be at least 1");
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().context("cannot start worker pool")?;
    let report = pool.install(|| run(cli.command, &config, &out))?;
    for (k, v) in report {
        println!("{k}={v}");
    }
    println!("output={}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
