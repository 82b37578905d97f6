//! MCMC output, toy samplers, and the classical post-processing steps:
//! burn-in removal, fixed-frequency thinning, R-hat and effective sample size.

mod diagnostics;
pub mod io;
mod samplers;

pub use diagnostics::{
    autocorrelation, burn_in_from_rhat, ess, ess_series, r_hat, rhat_checkpoints, rhat_trace,
    select_thinning_lag, BurnIn, RhatCheckpoint, ThinningLag, DEFAULT_DELTA,
    DEFAULT_THIN_THRESHOLD, N_CHECKPOINTS,
};
pub use samplers::{mala_sample, rwmh_sample};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TargetModel;

/// Provenance of a chain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub seed: Option<u64>,
    pub sampler: String,
    pub acceptance_rate: Option<f64>,
}

/// One realised sample path `X_1, ..., X_N`, stored row-major, with
/// optional cached scores `∇ log p(X_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    n: usize,
    dim: usize,
    states: Vec<f64>,
    grads: Option<Vec<f64>>,
    initial_state: Vec<f64>,
    pub meta: ChainMeta,
}

fn flatten(rows: &[Vec<f64>], dim: usize, what: &str) -> Result<Vec<f64>> {
    let mut flat = Vec::with_capacity(rows.len() * dim);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{what} row {i}")));
        }
        flat.extend_from_slice(row);
    }
    Ok(flat)
}

impl ChainOutput {
    /// Builds a chain from its rows; the initial state defaults to the
    /// first row.
    pub fn from_rows(states: &[Vec<f64>], grads: Option<&[Vec<f64>]>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::EmptyOutput);
        }
        let dim = states[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput("states must have at least one coordinate".into()));
        }
        let flat = flatten(states, dim, "state")?;
        let grads = match grads {
            Some(g) => {
                if g.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "{} gradient rows for {} states",
                        g.len(),
                        n
                    )));
                }
                Some(flatten(g, dim, "gradient")?)
            }
            None => None,
        };
        Ok(Self {
            n,
            dim,
            initial_state: states[0].clone(),
            states: flat,
            grads,
            meta: ChainMeta::default(),
        })
    }

    pub(crate) fn from_parts(
        dim: usize,
        states: Vec<f64>,
        grads: Option<Vec<f64>>,
        initial_state: Vec<f64>,
        meta: ChainMeta,
    ) -> Self {
        debug_assert_eq!(states.len() % dim, 0);
        Self {
            n: states.len() / dim,
            dim,
            states,
            grads,
            initial_state,
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn grad(&self, i: usize) -> Option<&[f64]> {
        self.grads
            .as_ref()
            .map(|g| &g[i * self.dim..(i + 1) * self.dim])
    }

    pub fn has_grads(&self) -> bool {
        self.grads.is_some()
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    pub fn states_flat(&self) -> &[f64] {
        &self.states
    }

    pub fn grads_flat(&self) -> Option<&[f64]> {
        self.grads.as_deref()
    }

    /// Values of coordinate `j` along the path.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.states[i * self.dim + j]).collect()
    }

    /// Replaces the cached gradients with `∇ log p` of `target` at every
    /// state. Needed when the chain was not run on the distribution being
    /// approximated.
    pub fn with_target_gradients(mut self, target: &TargetModel) -> Result<Self> {
        if target.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: target.dim(),
            });
        }
        let mut g = Vec::with_capacity(self.states.len());
        for i in 0..self.n {
            let gi = target.grad_log_density(self.state(i));
            if gi.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient at state {i}")));
            }
            g.extend(gi);
        }
        self.grads = Some(g);
        Ok(self)
    }

    /// Drops cached gradients.
    pub fn without_grads(mut self) -> Self {
        self.grads = None;
        self
    }

    /// Keeps the rows listed in `indices`, in order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyOutput);
        }
        let mut states = Vec::with_capacity(indices.len() * self.dim);
        let mut grads = self.grads.as_ref().map(|_| Vec::with_capacity(states.capacity()));
        for &i in indices {
            if i >= self.n {
                return Err(Error::InvalidInput(format!(
                    "index {i} out of range for chain of length {}",
                    self.n
                )));
            }
            states.extend_from_slice(self.state(i));
            if let (Some(g), Some(src)) = (grads.as_mut(), self.grad(i)) {
                g.extend_from_slice(src);
            }
        }
        Ok(Self::from_parts(
            self.dim,
            states,
            grads,
            self.initial_state.clone(),
            self.meta.clone(),
        ))
    }
}

/// Removes the first `b` states.
pub fn remove_burn_in(chain: &ChainOutput, b: usize) -> Result<ChainOutput> {
    if b >= chain.len() {
        return Err(Error::EmptyOutput);
    }
    let idx: Vec<usize> = (b..chain.len()).collect();
    chain.select(&idx)
}

/// Keeps every `k`th state starting with the first.
pub fn fixed_thin(chain: &ChainOutput, k: usize) -> Result<ChainOutput> {
    if k < 1 {
        return Err(Error::InvalidInput("thinning interval must be at least 1".into()));
    }
    let idx: Vec<usize> = (0..chain.len()).step_by(k).collect();
    chain.select(&idx)
}

/// Indices into a chain together with weights summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSupport {
    indices: Vec<usize>,
    weights: Vec<f64>,
}

impl WeightedSupport {
    pub fn new(indices: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidInput("support must be non-empty".into()));
        }
        if indices.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} indices but {} weights",
                indices.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("support weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { indices, weights })
    }

    /// Equal weights `1/M` on the given indices.
    pub fn uniform(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidInput("support must be non-empty".into()));
        }
        let w = 1.0 / indices.len() as f64;
        let weights = vec![w; indices.len()];
        Ok(Self { indices, weights })
    }

    /// Uniform support on every state of a chain of length `n`.
    pub fn full(n: usize) -> Result<Self> {
        Self::uniform((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn validate_for(&self, n: usize) -> Result<()> {
        match self.indices.iter().find(|&&i| i >= n) {
            Some(i) => Err(Error::InvalidInput(format!(
                "support index {i} out of range for chain of length {n}"
            ))),
            None => Ok(()),
        }
    }
}
