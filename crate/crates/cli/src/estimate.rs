use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use steinpost::chain::ChainOutput;
use steinpost::cv::{
    cf_estimate, cross_validate_kernel, secf_estimate, toy_integrand, vanilla_estimate, zvcv_estimate,
    CvScore, EstimateReport, IntegrandEvals, KernelMethod,
};
use steinpost::stein::{BaseKernel, ScoredPoints};
use steinpost::Error;

use crate::args::{Cli, EstimateArgs, Format, MethodArg};
use crate::common::{check_indices, emit, load_scored, to_json};

/// Integrand selected by `--f`.
enum Integrand {
    Toy,
    Coord(usize),
    Square(usize),
    Column(Vec<f64>),
}

fn parse_coord(s: &str, d: usize) -> Result<usize> {
    let k: usize = s
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad coordinate {s:?} in --f")))?;
    if k == 0 || k > d {
        bail!(Error::InvalidInput(format!("coordinate x{k} outside 1..={d}")));
    }
    Ok(k - 1)
}

fn read_column(path: &Path, name: &str, n: usize) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::InvalidInput(format!("column {name:?} not found in {}", path.display())))?;
    let mut values = Vec::with_capacity(n);
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(col).unwrap_or("").trim();
        let v: f64 = cell
            .parse()
            .map_err(|_| Error::InvalidInput(format!("row {} of column {name:?}: {cell:?} is not a number", row + 1)))?;
        values.push(v);
    }
    if values.len() != n {
        bail!(Error::InvalidInput(format!(
            "{} has {} rows but the chain has {n} states",
            path.display(),
            values.len()
        )));
    }
    Ok(values)
}

fn parse_integrand(args: &EstimateArgs, chain: &ChainOutput) -> Result<Integrand> {
    let d = chain.dim();
    let spec = args.f.trim();
    if let Some(name) = spec.strip_prefix("column:") {
        let path = args
            .evals
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("--f column:<name> requires --evals".into()))?;
        return Ok(Integrand::Column(read_column(path, name, chain.len())?));
    }
    if args.evals.is_some() {
        bail!(Error::InvalidInput("--evals is only used with --f column:<name>".into()));
    }
    if spec == "toy" {
        if d != 1 {
            bail!(Error::InvalidInput("the toy integrand is one-dimensional".into()));
        }
        return Ok(Integrand::Toy);
    }
    if let Some(rest) = spec.strip_prefix('x') {
        return match rest.strip_suffix("^2") {
            Some(k) => Ok(Integrand::Square(parse_coord(k, d)?)),
            None => Ok(Integrand::Coord(parse_coord(rest, d)?)),
        };
    }
    bail!(Error::InvalidInput(format!(
        "unknown integrand {spec:?}; use toy, x<k>, x<k>^2 or column:<name>"
    )))
}

#[derive(Serialize)]
struct Output<'a> {
    #[serde(flatten)]
    report: &'a EstimateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    cv_scores: Option<&'a [CvScore]>,
}

pub fn run(cli: &Cli, args: &EstimateArgs) -> Result<()> {
    let kernel_method = match args.method {
        MethodArg::Cf => Some(KernelMethod::Cf),
        MethodArg::Secf => Some(KernelMethod::Secf { degree: args.degree }),
        _ => None,
    };
    if kernel_method.is_some() && args.cv_grid.is_empty() {
        bail!(Error::InvalidInput("--cv-grid must list at least one lengthscale".into()));
    }
    let scored = load_scored(&args.score, Some(BaseKernel::gaussian(1.0)?))?;
    let chain = &scored.chain;
    let integrand = parse_integrand(args, chain)?;
    let indices = match &args.indices {
        Some(idx) => {
            check_indices(idx, chain.len())?;
            idx.clone()
        }
        None => (0..chain.len()).collect(),
    };
    let f_values: Vec<f64> = indices
        .iter()
        .map(|&i| {
            let x = chain.state(i);
            match &integrand {
                Integrand::Toy => toy_integrand(x[0]),
                Integrand::Coord(k) => x[*k],
                Integrand::Square(k) => x[*k] * x[*k],
                Integrand::Column(values) => values[i],
            }
        })
        .collect();
    let points = ScoredPoints::from_chain_with(chain, None, &indices)?;
    let evals = IntegrandEvals::uniform(f_values, points)?;

    let mut cv_scores = None;
    let report = match (args.method, kernel_method) {
        (MethodArg::Vanilla, _) => vanilla_estimate(&evals),
        (MethodArg::Zvcv, _) => zvcv_estimate(&evals, args.degree)?,
        (_, Some(method)) => {
            let lengthscale = if args.cv_grid.len() == 1 {
                args.cv_grid[0]
            } else {
                let sel = cross_validate_kernel(&evals, &scored.kernel, &args.cv_grid, args.folds, method, cli.seed)?;
                cv_scores = Some(sel.scores);
                sel.lengthscale
            };
            let kernel = scored.kernel.with_lengthscale(lengthscale)?;
            match method {
                KernelMethod::Cf => cf_estimate(&evals, &kernel)?,
                KernelMethod::Secf { degree } => secf_estimate(&evals, &kernel, degree)?,
            }
        }
        _ => unreachable!("kernel methods always carry a KernelMethod"),
    };

    let text = match cli.format {
        Format::Json => to_json(&Output {
            report: &report,
            cv_scores: cv_scores.as_deref(),
        })?,
        Format::Csv => format!(
            "estimate,method,ls,ev,lengthscale\n{},{},{},{},{}\n",
            report.estimate,
            report.method,
            report.proxy.ls,
            report.proxy.ev,
            report.lengthscale.map(|l| l.to_string()).unwrap_or_default()
        ),
    };
    emit(cli.output.as_deref(), &text)
}
