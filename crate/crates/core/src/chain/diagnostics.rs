use serde::{Deserialize, Serialize};

use super::ChainOutput;
use crate::error::{Error, Result};

/// R-hat threshold currently advocated for burn-in selection.
pub const DEFAULT_DELTA: f64 = 0.01;
/// Autocorrelation level below which lagged states count as uncorrelated.
pub const DEFAULT_THIN_THRESHOLD: f64 = 0.1;
/// Number of prefix lengths at which R-hat is evaluated.
pub const N_CHECKPOINTS: usize = 20;
const MAX_THIN_LAG: usize = 1000;

/// Lazily evaluated sample autocorrelation of one series.
struct Acf {
    centred: Vec<f64>,
    gamma0: f64,
}

impl Acf {
    fn new(series: &[f64]) -> Result<Self> {
        let n = series.len();
        if n < 2 {
            return Err(Error::InvalidInput("series needs at least two values".into()));
        }
        let mean = series.iter().sum::<f64>() / n as f64;
        let centred: Vec<f64> = series.iter().map(|x| x - mean).collect();
        let gamma0 = centred.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let scale = mean.abs().max(1.0);
        if gamma0 <= (f64::EPSILON * scale).powi(2) {
            return Err(Error::Degenerate("series has zero variance".into()));
        }
        Ok(Self { centred, gamma0 })
    }

    fn len(&self) -> usize {
        self.centred.len()
    }

    /// Biased (divide-by-N) autocovariance at `lag` over the lag-0 value.
    fn rho(&self, lag: usize) -> f64 {
        if lag == 0 {
            return 1.0;
        }
        let x = &self.centred;
        let s: f64 = x[..x.len() - lag]
            .iter()
            .zip(&x[lag..])
            .map(|(a, b)| a * b)
            .sum();
        s / x.len() as f64 / self.gamma0
    }
}

/// Sample autocorrelations `ρ_0, ..., ρ_max_lag`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag >= series.len() {
        return Err(Error::InvalidInput(format!(
            "max lag {max_lag} must be below the series length {}",
            series.len()
        )));
    }
    let acf = Acf::new(series)?;
    Ok((0..=max_lag).map(|t| acf.rho(t)).collect())
}

/// Chosen thinning interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThinningLag {
    pub lag: usize,
    /// Set when some coordinate never fell below the threshold and the
    /// maximum admissible lag was returned instead.
    pub saturated: bool,
}

/// Smallest lag at which every coordinate's autocorrelation is below
/// `threshold` in absolute value (maximum over coordinates). Lags are
/// searched up to `min(N - 1, 1000)`.
pub fn select_thinning_lag(chain: &ChainOutput, threshold: f64) -> Result<ThinningLag> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let max_lag = (chain.len().saturating_sub(1)).min(MAX_THIN_LAG);
    if max_lag == 0 {
        return Err(Error::InvalidInput("chain needs at least two states".into()));
    }
    let mut out = ThinningLag {
        lag: 1,
        saturated: false,
    };
    for j in 0..chain.dim() {
        let acf = Acf::new(&chain.coordinate(j))?;
        match (1..=max_lag).find(|&t| acf.rho(t).abs() < threshold) {
            Some(t) => out.lag = out.lag.max(t),
            None => {
                out.lag = max_lag;
                out.saturated = true;
            }
        }
    }
    Ok(out)
}

/// Effective sample size of one series using Geyer's initial positive
/// sequence: autocorrelations are summed in pairs `ρ_{2m} + ρ_{2m+1}` up to
/// the first non-positive pair. Capped at the series length.
pub fn ess_series(series: &[f64]) -> Result<f64> {
    if series.len() < 10 {
        return Err(Error::InvalidInput("ESS needs at least 10 states".into()));
    }
    let acf = Acf::new(series)?;
    let n = acf.len();
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = acf.rho(2 * m) + acf.rho(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    // antithetic series can give tau < 1 (even negative); the cap applies
    if tau <= 1.0 {
        return Ok(n as f64);
    }
    Ok(n as f64 / tau)
}

/// Per-coordinate effective sample size.
pub fn ess(chain: &ChainOutput) -> Result<Vec<f64>> {
    (0..chain.dim())
        .map(|j| {
            ess_series(&chain.coordinate(j)).map_err(|e| match e {
                Error::Degenerate(msg) => Error::Degenerate(format!("coordinate {}: {msg}", j + 1)),
                other => other,
            })
        })
        .collect()
}

fn check_chains(chains: &[ChainOutput]) -> Result<(usize, usize)> {
    if chains.len() < 2 {
        return Err(Error::InvalidInput("R-hat needs at least two chains".into()));
    }
    let (n, d) = (chains[0].len(), chains[0].dim());
    for c in &chains[1..] {
        if c.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.dim(),
            });
        }
        if c.len() != n {
            return Err(Error::InvalidInput(format!(
                "chains have different lengths ({n} and {})",
                c.len()
            )));
        }
    }
    if n < 2 {
        return Err(Error::InvalidInput("R-hat needs chains of length at least 2".into()));
    }
    Ok((n, d))
}

/// R-hat on the first `n` states of every chain.
fn r_hat_prefix(chains: &[ChainOutput], n: usize, d: usize) -> Result<Vec<f64>> {
    let l = chains.len() as f64;
    let nf = n as f64;
    (0..d)
        .map(|j| {
            let mut means = Vec::with_capacity(chains.len());
            let mut within = 0.0;
            for c in chains {
                let xs: Vec<f64> = (0..n).map(|i| c.state(i)[j]).collect();
                let m = xs.iter().sum::<f64>() / nf;
                let s2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nf - 1.0);
                means.push(m);
                within += s2;
            }
            let s2 = within / l;
            if s2 <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "coordinate {} has zero within-chain variance",
                    j + 1
                )));
            }
            let grand = means.iter().sum::<f64>() / l;
            let between = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (l - 1.0);
            Ok(((nf - 1.0) / nf + between / s2).sqrt())
        })
        .collect()
}

/// Gelman-Rubin statistic per coordinate,
/// `sqrt((((N-1)/N) s² + B) / s²)` with `s²` the mean within-chain variance
/// and `B` the sample variance of the chain means.
pub fn r_hat(chains: &[ChainOutput]) -> Result<Vec<f64>> {
    let (n, d) = check_chains(chains)?;
    r_hat_prefix(chains, n, d)
}

/// Logarithmically spaced prefix lengths from `max(2, ⌈N/100⌉)` to `N`.
pub fn rhat_checkpoints(n: usize) -> Vec<usize> {
    if n < 2 {
        return Vec::new();
    }
    let lo = n.div_ceil(100).max(2).min(n) as f64;
    let hi = n as f64;
    let mut out: Vec<usize> = (0..N_CHECKPOINTS)
        .map(|k| {
            let t = k as f64 / (N_CHECKPOINTS - 1) as f64;
            (lo * (hi / lo).powf(t)).round() as usize
        })
        .collect();
    out.dedup();
    *out.last_mut().unwrap() = n;
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhatCheckpoint {
    pub n: usize,
    /// `None` when a prefix has zero within-chain variance.
    pub r_hat: Option<Vec<f64>>,
}

/// R-hat evaluated on each checkpoint prefix.
pub fn rhat_trace(chains: &[ChainOutput]) -> Result<Vec<RhatCheckpoint>> {
    let (n, d) = check_chains(chains)?;
    rhat_checkpoints(n)
        .into_iter()
        .map(|len| match r_hat_prefix(chains, len, d) {
            Ok(r) => Ok(RhatCheckpoint { n: len, r_hat: Some(r) }),
            Err(Error::Degenerate(_)) if len < n => Ok(RhatCheckpoint { n: len, r_hat: None }),
            Err(e) => Err(e),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BurnIn {
    /// Number of initial states to discard.
    Converged(usize),
    NotConverged,
}

impl BurnIn {
    pub fn length(self) -> Option<usize> {
        match self {
            BurnIn::Converged(b) => Some(b),
            BurnIn::NotConverged => None,
        }
    }
}

/// Smallest checkpoint prefix length whose largest per-coordinate R-hat is
/// below `1 + delta`; that prefix is the burn-in.
pub fn burn_in_from_rhat(chains: &[ChainOutput], delta: f64) -> Result<BurnIn> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    Ok(burn_in_from_trace(&rhat_trace(chains)?, delta))
}

pub(crate) fn burn_in_from_trace(trace: &[RhatCheckpoint], delta: f64) -> BurnIn {
    trace
        .iter()
        .find(|cp| {
            cp.r_hat
                .as_ref()
                .is_some_and(|r| r.iter().all(|&v| v < 1.0 + delta))
        })
        .map_or(BurnIn::NotConverged, |cp| BurnIn::Converged(cp.n))
}
