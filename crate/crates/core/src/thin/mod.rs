//! Stein thinning: greedy selection of states that minimises the kernel
//! Stein discrepancy of the uniform distribution on the selection.
//!
//! The myopic rule picks, at iteration `j`,
//!
//! ```text
//! argminᵢ  k_P(Xᵢ, Xᵢ)/2 + Σ_{j' < j} k_P(X_{π(j')}, Xᵢ)
//! ```
//!
//! over all states. The look-ahead variant picks `s` states at a time from a
//! random mini-batch by solving a small integer quadratic programme.

mod iqp;

pub use iqp::{multiset_count, solve_iqp, IqpInstance, IqpMode, IqpSolution, EXHAUSTIVE_CAP};

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::ChainOutput;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::stein::{stein_gram, ScoredPoints, SteinKernel};

/// How the per-iteration IQP is solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IqpSolver {
    /// Enumerate when at most [`EXHAUSTIVE_CAP`] multisets exist, otherwise
    /// use the heuristic.
    #[default]
    Auto,
    Exhaustive,
    Heuristic,
}

/// Parameters echoed in a [`ThinningResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinningConfig {
    pub iterations: usize,
    pub horizon: usize,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub solver: Option<IqpSolver>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinningResult {
    /// Chain indices in order of selection; may repeat.
    pub selected: Vec<usize>,
    /// KSD of the uniform distribution on the selection after each
    /// iteration.
    pub ksd_trace: Vec<f64>,
    /// Value of the minimised objective at each iteration.
    pub objective_trace: Vec<f64>,
    pub config: ThinningConfig,
}

fn scored(chain: &ChainOutput, kernel: &SteinKernel) -> Result<ScoredPoints> {
    if chain.is_empty() {
        return Err(Error::EmptyOutput);
    }
    ScoredPoints::from_full_chain(chain, kernel)
}

/// Greedy Stein thinning to `m` states.
///
/// Interaction sums with the current selection are cached, so each
/// iteration costs `N` Stein kernel evaluations. Ties go to the lowest
/// index; a state may be chosen more than once.
pub fn stein_thin(chain: &ChainOutput, kernel: &SteinKernel, m: usize) -> Result<ThinningResult> {
    if m == 0 {
        return Err(Error::InvalidInput("number of selected states must be at least 1".into()));
    }
    let pts = scored(chain, kernel)?;
    let n = pts.len();
    let diag: Vec<f64> = (0..n).into_par_iter().map(|i| pts.kp(kernel, i, i)).collect();
    if let Some(i) = diag.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("Stein kernel at state {i}")));
    }
    let mut running = vec![0.0; n];
    let mut selected = Vec::with_capacity(m);
    let mut ksd_trace = Vec::with_capacity(m);
    let mut objective_trace = Vec::with_capacity(m);
    let mut total = 0.0;
    for j in 0..m {
        let mut best = 0;
        let mut best_val = f64::INFINITY;
        for i in 0..n {
            let val = 0.5 * diag[i] + running[i];
            if val < best_val {
                best_val = val;
                best = i;
            }
        }
        total += diag[best] + 2.0 * running[best];
        selected.push(best);
        objective_trace.push(best_val);
        ksd_trace.push(total.max(0.0).sqrt() / (j + 1) as f64);
        running
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, r)| *r += pts.kp(kernel, best, i));
    }
    Ok(ThinningResult {
        selected,
        ksd_trace,
        objective_trace,
        config: ThinningConfig {
            iterations: m,
            horizon: 1,
            batch_size: None,
            seed: None,
            solver: None,
        },
    })
}

/// Options for [`stein_thin_nonmyopic`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonMyopicOptions {
    pub iterations: usize,
    /// Look-ahead horizon `s`: states selected per iteration.
    pub horizon: usize,
    /// Mini-batch size `B`; defaults to `10 s` capped at the chain length.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub solver: IqpSolver,
}

impl NonMyopicOptions {
    pub fn new(iterations: usize, horizon: usize, seed: u64) -> Self {
        Self {
            iterations,
            horizon,
            batch_size: None,
            seed,
            solver: IqpSolver::Auto,
        }
    }

    pub fn batch_size(mut self, b: usize) -> Self {
        self.batch_size = Some(b);
        self
    }

    pub fn solver(mut self, solver: IqpSolver) -> Self {
        self.solver = solver;
        self
    }
}

/// Look-ahead Stein thinning with mini-batches.
///
/// Each iteration draws `B` distinct states uniformly (kept in chain order;
/// `B = N` therefore uses the whole chain deterministically), builds the IQP
/// whose linear term is the interaction of each batch member with every
/// state selected so far, and appends the optimal multiset of `s` states.
/// `M` iterations select `M s` states.
pub fn stein_thin_nonmyopic(
    chain: &ChainOutput,
    kernel: &SteinKernel,
    opts: &NonMyopicOptions,
) -> Result<ThinningResult> {
    let s = opts.horizon;
    if opts.iterations == 0 || s == 0 {
        return Err(Error::InvalidInput("iterations and horizon must be at least 1".into()));
    }
    let pts = scored(chain, kernel)?;
    let n = pts.len();
    let b = opts.batch_size.unwrap_or((10 * s).min(n));
    if b == 0 || b > n {
        return Err(Error::InvalidInput(format!(
            "batch size {b} must lie in [1, {n}]"
        )));
    }
    let mode = match opts.solver {
        IqpSolver::Exhaustive => IqpMode::Exhaustive,
        IqpSolver::Heuristic => IqpMode::Heuristic,
        IqpSolver::Auto if multiset_count(b, s) <= EXHAUSTIVE_CAP => IqpMode::Exhaustive,
        IqpSolver::Auto => IqpMode::Heuristic,
    };
    let mut rng = rng_from_seed(opts.seed);
    let mut selected: Vec<usize> = Vec::with_capacity(opts.iterations * s);
    let mut ksd_trace = Vec::with_capacity(opts.iterations);
    let mut objective_trace = Vec::with_capacity(opts.iterations);
    let mut total = 0.0;
    for _ in 0..opts.iterations {
        let batch: Vec<usize> = if b == n {
            (0..n).collect()
        } else {
            let mut idx = sample(&mut rng, n, b).into_vec();
            idx.sort_unstable();
            idx
        };
        let batch_pts = pts.subset(&batch);
        let gram = stein_gram(kernel, &batch_pts)?;
        let linear: Vec<f64> = batch
            .par_iter()
            .map(|&cand| {
                let mut acc = 0.0;
                for &sel in &selected {
                    acc += pts.kp(kernel, sel, cand);
                }
                acc
            })
            .collect();
        let inst = IqpInstance::new(gram, linear, s)?;
        let sol = solve_iqp(&inst, mode)?;
        for (pos, &mult) in sol.multiplicities.iter().enumerate() {
            selected.extend(std::iter::repeat_n(batch[pos], mult));
        }
        total += 2.0 * sol.objective;
        objective_trace.push(sol.objective);
        ksd_trace.push(total.max(0.0).sqrt() / selected.len() as f64);
    }
    Ok(ThinningResult {
        selected,
        ksd_trace,
        objective_trace,
        config: ThinningConfig {
            iterations: opts.iterations,
            horizon: s,
            batch_size: Some(b),
            seed: Some(opts.seed),
            solver: Some(opts.solver),
        },
    })
}
