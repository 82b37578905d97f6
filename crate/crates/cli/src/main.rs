use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::Parser;

mod args;
mod bench;
mod common;
mod diagnose;
mod estimate;
mod sample;
mod thin;

use args::{Cli, Command};

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(steinpost::Error::InvalidInput("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Sample(a) => sample::run(cli, a),
        Command::Diagnose(a) => diagnose::run(cli, a),
        Command::Thin(a) => thin::run_thin(cli, a),
        Command::Ksd(a) => thin::run_ksd(cli, a),
        Command::Estimate(a) => estimate::run(cli, a),
        Command::Bench(a) => bench::run(cli, a),
    }
}

/// 3 for numerical failures, 2 for everything else (bad input, I/O).
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<steinpost::Error>() {
        Some(e) if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
