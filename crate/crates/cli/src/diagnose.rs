use std::collections::BTreeMap;

use anyhow::{bail, Result};
use serde::Serialize;
use steinpost::chain::{burn_in_from_rhat, ess, r_hat, rhat_trace, select_thinning_lag, RhatCheckpoint};

use crate::args::{Cli, DiagnoseArgs, Format};
use crate::common::{emit, load_chain, to_json};

/// Thresholds at which burn-in is reported; the second is the default.
const DELTAS: [(&str, f64); 2] = [("0.1", 0.1), ("0.01", 0.01)];

#[derive(Serialize)]
struct Report {
    chains: usize,
    n: usize,
    dim: usize,
    /// Per-coordinate R-hat on the full chains; null for a single chain.
    r_hat: Option<Vec<f64>>,
    /// Per-coordinate effective sample size summed over chains.
    ess: Vec<f64>,
    /// Burn-in at δ = 0.01; null if not converged or a single chain.
    burn_in: Option<usize>,
    burn_in_by_delta: BTreeMap<&'static str, Option<usize>>,
    /// Largest per-chain thinning lag.
    thin_lag: usize,
    thin_lag_saturated: bool,
    rhat_trace: Vec<RhatCheckpoint>,
}

pub fn run(cli: &Cli, args: &DiagnoseArgs) -> Result<()> {
    if args.rhat && args.chains.len() < 2 {
        bail!(steinpost::Error::InvalidInput(
            "R-hat needs at least two chains".into()
        ));
    }
    if !(args.thin_threshold > 0.0 && args.thin_threshold < 1.0) {
        bail!(steinpost::Error::InvalidInput("--thin-threshold must lie in (0, 1)".into()));
    }
    let chains = args
        .chains
        .iter()
        .map(|p| load_chain(p))
        .collect::<Result<Vec<_>>>()?;
    let (n, dim) = (chains[0].len(), chains[0].dim());
    if let Some(c) = chains.iter().find(|c| c.len() != n || c.dim() != dim) {
        bail!(steinpost::Error::InvalidInput(format!(
            "chains differ in shape: {n}x{dim} and {}x{}",
            c.len(),
            c.dim()
        )));
    }

    let mut ess_total = vec![0.0; dim];
    let mut thin_lag = 0;
    let mut saturated = false;
    for c in &chains {
        for (t, e) in ess_total.iter_mut().zip(ess(c)?) {
            *t += e;
        }
        let lag = select_thinning_lag(c, args.thin_threshold)?;
        thin_lag = thin_lag.max(lag.lag);
        saturated |= lag.saturated;
    }

    let multi = chains.len() >= 2;
    let mut burn_in_by_delta = BTreeMap::new();
    for (name, delta) in DELTAS {
        let b = if multi { burn_in_from_rhat(&chains, delta)?.length() } else { None };
        burn_in_by_delta.insert(name, b);
    }
    let report = Report {
        chains: chains.len(),
        n,
        dim,
        r_hat: if multi { Some(r_hat(&chains)?) } else { None },
        ess: ess_total,
        burn_in: burn_in_by_delta["0.01"],
        burn_in_by_delta,
        thin_lag,
        thin_lag_saturated: saturated,
        rhat_trace: if multi { rhat_trace(&chains)? } else { Vec::new() },
    };

    let text = match cli.format {
        Format::Json => to_json(&report)?,
        Format::Csv => trace_csv(&report),
    };
    emit(cli.output.as_deref(), &text)
}

fn trace_csv(report: &Report) -> String {
    let mut out = String::from("n");
    for j in 1..=report.dim {
        out.push_str(&format!(",r_hat_x{j}"));
    }
    out.push('\n');
    for cp in &report.rhat_trace {
        out.push_str(&cp.n.to_string());
        for j in 0..report.dim {
            out.push(',');
            if let Some(r) = &cp.r_hat {
                out.push_str(&r[j].to_string());
            }
        }
        out.push('\n');
    }
    out
}
