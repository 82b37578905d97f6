use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use steinpost::chain::io::read_chain_file;
use steinpost::chain::ChainOutput;
use steinpost::model::{TargetModel, TargetSpec};
use steinpost::stein::{median_heuristic, BaseKernel, SteinKernel};

use crate::args::ScoreArgs;

/// `benchmark` or a path to a target JSON document.
pub fn load_target(spec: &str) -> Result<TargetModel> {
    let doc = if spec == "benchmark" {
        TargetSpec::benchmark()
    } else {
        let text = fs::read_to_string(spec).with_context(|| format!("reading target {spec}"))?;
        TargetSpec::from_json(&text).with_context(|| format!("parsing target {spec}"))?
    };
    Ok(doc.build()?)
}

/// Inline JSON (starting with `{`) or a path to a kernel JSON file.
pub fn load_kernel(spec: &str) -> Result<BaseKernel> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        fs::read_to_string(spec).with_context(|| format!("reading kernel {spec}"))?
    };
    Ok(BaseKernel::from_json(&text).with_context(|| format!("parsing kernel {spec}"))?)
}

pub fn load_chain(path: &Path) -> Result<ChainOutput> {
    read_chain_file(path).with_context(|| format!("reading chain {}", path.display()))
}

/// A chain with scores attached and the Stein kernel to judge it by.
pub struct Scored {
    pub chain: ChainOutput,
    pub kernel: SteinKernel,
}

/// Loads the chain, target and kernel named by `args`. A target replaces
/// any stored gradients; without one the chain must carry them. Without
/// `--kernel`, `default` is used, with the median heuristic lengthscale when
/// `default` is `None`.
pub fn load_scored(args: &ScoreArgs, default: Option<BaseKernel>) -> Result<Scored> {
    let chain = load_chain(&args.chain)?;
    let target = args.target.as_deref().map(load_target).transpose()?;
    let base = args.kernel.as_deref().map(load_kernel).transpose()?;
    let chain = match &target {
        Some(t) => chain.with_target_gradients(t)?,
        None if chain.has_grads() => chain,
        None => bail!(steinpost::Error::MissingGradients),
    };
    let base = match (base, default) {
        (Some(b), _) => b,
        (None, Some(b)) => b,
        (None, None) => BaseKernel::default().with_lengthscale(median_heuristic(&chain)?)?,
    };
    let kernel = SteinKernel::new(base, target)?;
    Ok(Scored { chain, kernel })
}

pub fn check_indices(indices: &[usize], n: usize) -> Result<()> {
    if indices.is_empty() {
        bail!(steinpost::Error::InvalidInput("index list is empty".into()));
    }
    if let Some(i) = indices.iter().find(|&&i| i >= n) {
        bail!(steinpost::Error::InvalidInput(format!(
            "index {i} out of range for chain of length {n}"
        )));
    }
    Ok(())
}

/// Writes `text` to `path`, or to stdout.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Creates `dir` (and parents) for commands that write several files.
pub fn output_dir<'a>(path: Option<&'a Path>, what: &str) -> Result<&'a Path> {
    let dir = path.with_context(|| format!("{what} needs --output <directory>"))?;
    if dir.exists() && !dir.is_dir() {
        bail!("{} exists and is not a directory", dir.display());
    }
    Ok(dir)
}
