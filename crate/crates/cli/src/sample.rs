use std::fs;

use anyhow::{bail, Context, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use steinpost::chain::io::write_chain_file;
use steinpost::chain::{mala_sample, rwmh_sample};
use steinpost::rng::{derive_seed, rng_from_seed};

use crate::args::{Cli, SampleArgs, Sampler};
use crate::common::{load_target, output_dir, to_json};

#[derive(Serialize)]
struct ChainEntry {
    file: String,
    seed: u64,
    initial_state: Vec<f64>,
    acceptance_rate: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    target: &'a str,
    sampler: &'static str,
    steps: usize,
    step_size: f64,
    seed: u64,
    chains: Vec<ChainEntry>,
}

pub fn run(cli: &Cli, args: &SampleArgs) -> Result<()> {
    if args.steps == 0 {
        bail!(steinpost::Error::InvalidInput("--steps must be at least 1".into()));
    }
    if args.chains == 0 {
        bail!(steinpost::Error::InvalidInput("--chains must be at least 1".into()));
    }
    if !(args.init_spread >= 0.0 && args.init_spread.is_finite()) {
        bail!(steinpost::Error::InvalidInput("--init-spread must be non-negative".into()));
    }
    let dir = output_dir(cli.output.as_deref(), "sample")?;
    let target = load_target(&args.target)?;
    let d = target.dim();
    let base = args.init.clone().unwrap_or_else(|| vec![0.0; d]);
    if base.len() != d {
        bail!(steinpost::Error::DimensionMismatch { expected: d, got: base.len() });
    }

    let mut chains = Vec::with_capacity(args.chains);
    let mut entries = Vec::with_capacity(args.chains);
    for l in 0..args.chains {
        let seed = derive_seed(cli.seed, l as u64);
        let mut rng = rng_from_seed(derive_seed(seed, 1));
        let x0: Vec<f64> = base
            .iter()
            .map(|b| b + args.init_spread * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let chain = match args.sampler {
            Sampler::Rwmh => rwmh_sample(&target, &x0, args.steps, args.step_size, seed)?,
            Sampler::Mala => mala_sample(&target, &x0, args.steps, args.step_size, seed)?,
        };
        entries.push(ChainEntry {
            file: format!("chain_{}.csv", l + 1),
            seed,
            initial_state: x0,
            acceptance_rate: chain.meta.acceptance_rate,
        });
        chains.push(chain);
    }

    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (entry, chain) in entries.iter().zip(&chains) {
        write_chain_file(dir.join(&entry.file), chain)?;
    }
    let manifest = Manifest {
        target: &args.target,
        sampler: match args.sampler {
            Sampler::Rwmh => "rwmh",
            Sampler::Mala => "mala",
        },
        steps: args.steps,
        step_size: args.step_size,
        seed: cli.seed,
        chains: entries,
    };
    fs::write(dir.join("manifest.json"), to_json(&manifest)?)?;
    Ok(())
}
