use anyhow::{bail, Result};
use serde::Serialize;
use steinpost::chain::io::write_chain_file;
use steinpost::chain::WeightedSupport;
use steinpost::stein::{ksd, BaseKernel};
use steinpost::thin::{stein_thin, stein_thin_nonmyopic, IqpSolver, NonMyopicOptions, ThinningResult};

use crate::args::{Cli, Format, KsdArgs, Solver, ThinArgs, ThinMode};
use crate::common::{check_indices, emit, load_scored, to_json};

#[derive(Serialize)]
struct ThinReport<'a> {
    indices: &'a [usize],
    ksd_trace: &'a [f64],
    objective_trace: &'a [f64],
    mode: &'static str,
    horizon: usize,
    batch_size: Option<usize>,
    kernel: &'a BaseKernel,
}

pub fn run_thin(cli: &Cli, args: &ThinArgs) -> Result<()> {
    if args.m == 0 {
        bail!(steinpost::Error::InvalidInput("--m must be at least 1".into()));
    }
    if args.mode == ThinMode::Myopic && (args.horizon.is_some() || args.batch.is_some() || args.solver.is_some()) {
        bail!(steinpost::Error::InvalidInput(
            "--horizon, --batch and --solver apply only with --mode nonmyopic".into()
        ));
    }
    let scored = load_scored(&args.score, None)?;
    let res: ThinningResult = match args.mode {
        ThinMode::Myopic => stein_thin(&scored.chain, &scored.kernel, args.m)?,
        ThinMode::Nonmyopic => {
            let mut opts = NonMyopicOptions::new(args.m, args.horizon.unwrap_or(4), cli.seed);
            if let Some(b) = args.batch {
                opts = opts.batch_size(b);
            }
            if let Some(s) = args.solver {
                opts = opts.solver(match s {
                    Solver::Auto => IqpSolver::Auto,
                    Solver::Exhaustive => IqpSolver::Exhaustive,
                    Solver::Heuristic => IqpSolver::Heuristic,
                });
            }
            stein_thin_nonmyopic(&scored.chain, &scored.kernel, &opts)?
        }
    };

    if let Some(path) = &args.states_out {
        write_chain_file(path, &scored.chain.select(&res.selected)?)?;
    }
    let text = match cli.format {
        Format::Json => to_json(&ThinReport {
            indices: &res.selected,
            ksd_trace: &res.ksd_trace,
            objective_trace: &res.objective_trace,
            mode: match args.mode {
                ThinMode::Myopic => "myopic",
                ThinMode::Nonmyopic => "nonmyopic",
            },
            horizon: res.config.horizon,
            batch_size: res.config.batch_size,
            kernel: &scored.kernel.base,
        })?,
        Format::Csv => {
            // one row per selected state, with the KSD after its iteration
            let per_iter = res.config.horizon;
            let mut out = String::from("index,ksd\n");
            for (k, i) in res.selected.iter().enumerate() {
                out.push_str(&format!("{i},{}\n", res.ksd_trace[k / per_iter]));
            }
            out
        }
    };
    emit(cli.output.as_deref(), &text)
}

#[derive(Serialize)]
struct KsdReport<'a> {
    ksd: f64,
    n_points: usize,
    kernel: &'a BaseKernel,
}

pub fn run_ksd(cli: &Cli, args: &KsdArgs) -> Result<()> {
    if args.weights.is_some() && args.indices.is_none() {
        bail!(steinpost::Error::InvalidInput("--weights requires --indices".into()));
    }
    let scored = load_scored(&args.score, None)?;
    let n = scored.chain.len();
    let support = match (&args.indices, &args.weights) {
        (None, _) => WeightedSupport::full(n)?,
        (Some(idx), None) => {
            check_indices(idx, n)?;
            WeightedSupport::uniform(idx.clone())?
        }
        (Some(idx), Some(w)) => {
            check_indices(idx, n)?;
            WeightedSupport::new(idx.clone(), w.clone())?
        }
    };
    let value = ksd(&scored.kernel, &support, &scored.chain)?;
    let text = match cli.format {
        Format::Json => to_json(&KsdReport {
            ksd: value,
            n_points: support.len(),
            kernel: &scored.kernel.base,
        })?,
        Format::Csv => format!("ksd,n_points\n{value},{}\n", support.len()),
    };
    emit(cli.output.as_deref(), &text)
}
