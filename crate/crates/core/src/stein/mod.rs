//! Stein kernels and kernel Stein discrepancy.
//!
//! For a base kernel `k` and score `u = ∇ log p`, the Stein kernel is
//!
//! ```text
//! k_P(x, y) = ∇ₓ·∇ᵧk + ∇ₓk·u(y) + ∇ᵧk·u(x) + k u(x)·u(y)
//! ```
//!
//! and the discrepancy of a weighted point set is
//! `D = sqrt(Σᵢⱼ wᵢ wⱼ k_P(xᵢ, xⱼ))`. Only scores at the points are needed;
//! they are taken from the chain when cached there.

mod kernel;

pub use kernel::{BaseKernel, KernelDerivs, KernelFamily};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::chain::{ChainOutput, WeightedSupport};
use crate::error::{Error, Result};
use crate::model::TargetModel;
use kernel::sq_dist;

/// Langevin Stein operator applied to a vector field `h` at one point:
/// `∇·h + u·h`. The field enters through its divergence and value.
pub fn stein_operator(div_h: f64, h: &[f64], u: &[f64]) -> f64 {
    div_h + h.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()
}

/// Base kernel paired with the target whose score enters `k_P`.
///
/// The target is optional: when every chain carries cached gradients the
/// score function itself is never called.
#[derive(Clone, Debug)]
pub struct SteinKernel {
    pub base: BaseKernel,
    pub target: Option<TargetModel>,
}

impl SteinKernel {
    pub fn new(base: BaseKernel, target: Option<TargetModel>) -> Result<Self> {
        base.validate()?;
        Ok(Self { base, target })
    }

    pub fn with_target(base: BaseKernel, target: TargetModel) -> Result<Self> {
        Self::new(base, Some(target))
    }

    pub fn with_lengthscale(&self, lengthscale: f64) -> Result<Self> {
        Ok(Self {
            base: self.base.with_lengthscale(lengthscale)?,
            target: self.target.clone(),
        })
    }

    /// `k_P(x, y)` given the scores `ux`, `uy` at the two points.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64], ux: &[f64], uy: &[f64]) -> f64 {
        let r = self.base.radial(sq_dist(x, y), x.len());
        let mut cross = 0.0;
        let mut uu = 0.0;
        for i in 0..x.len() {
            cross += (x[i] - y[i]) * (uy[i] - ux[i]);
            uu += ux[i] * uy[i];
        }
        r.div + r.a * cross + r.k * uu
    }

    pub fn eval(&self, x: &[f64], y: &[f64], ux: &[f64], uy: &[f64]) -> Result<f64> {
        let d = x.len();
        for v in [y, ux, uy] {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
        }
        Ok(self.eval_unchecked(x, y, ux, uy))
    }
}

/// Four-term Stein kernel value; equivalent to [`SteinKernel::eval`].
pub fn stein_kernel_eval(
    kernel: &SteinKernel,
    x: &[f64],
    y: &[f64],
    ux: &[f64],
    uy: &[f64],
) -> Result<f64> {
    kernel.eval(x, y, ux, uy)
}

/// Points with their scores, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPoints {
    dim: usize,
    points: Vec<f64>,
    grads: Vec<f64>,
}

impl ScoredPoints {
    pub fn new(dim: usize, points: Vec<f64>, grads: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if points.len() % dim != 0 || points.len() != grads.len() {
            return Err(Error::InvalidInput(format!(
                "{} point values and {} gradient values do not form rows of length {dim}",
                points.len(),
                grads.len()
            )));
        }
        if points.iter().chain(&grads).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point or gradient".into()));
        }
        Ok(Self { dim, points, grads })
    }

    pub fn from_rows(points: &[Vec<f64>], grads: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.len() != grads.len() {
            return Err(Error::InvalidInput("points and gradients differ in count".into()));
        }
        if points.iter().chain(grads).any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("rows have inconsistent lengths".into()));
        }
        Self::new(dim, points.concat(), grads.concat())
    }

    /// Rows `indices` of `chain`, with scores from the chain's cache or,
    /// failing that, from the kernel's target.
    pub fn from_chain(chain: &ChainOutput, kernel: &SteinKernel, indices: &[usize]) -> Result<Self> {
        Self::from_chain_with(chain, kernel.target.as_ref(), indices)
    }

    /// As [`ScoredPoints::from_chain`] with an explicit fallback target.
    pub fn from_chain_with(
        chain: &ChainOutput,
        target: Option<&TargetModel>,
        indices: &[usize],
    ) -> Result<Self> {
        let d = chain.dim();
        let mut points = Vec::with_capacity(indices.len() * d);
        let mut grads = Vec::with_capacity(indices.len() * d);
        let target = match (chain.has_grads(), target) {
            (true, _) => None,
            (false, Some(t)) => {
                if t.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: t.dim(),
                    });
                }
                Some(t)
            }
            (false, None) => return Err(Error::MissingGradients),
        };
        for &i in indices {
            if i >= chain.len() {
                return Err(Error::InvalidInput(format!(
                    "index {i} out of range for chain of length {}",
                    chain.len()
                )));
            }
            points.extend_from_slice(chain.state(i));
            match (chain.grad(i), target) {
                (Some(g), _) => grads.extend_from_slice(g),
                (None, Some(t)) => grads.extend(t.grad_log_density(chain.state(i))),
                (None, None) => unreachable!(),
            }
        }
        Self::new(d, points, grads)
    }

    /// Every state of the chain.
    pub fn from_full_chain(chain: &ChainOutput, kernel: &SteinKernel) -> Result<Self> {
        let idx: Vec<usize> = (0..chain.len()).collect();
        Self::from_chain(chain, kernel, &idx)
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn grad(&self, i: usize) -> &[f64] {
        &self.grads[i * self.dim..(i + 1) * self.dim]
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        let mut grads = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            points.extend_from_slice(self.point(i));
            grads.extend_from_slice(self.grad(i));
        }
        Self {
            dim: self.dim,
            points,
            grads,
        }
    }

    /// `k_P` between rows `i` and `j`.
    #[inline]
    pub(crate) fn kp(&self, kernel: &SteinKernel, i: usize, j: usize) -> f64 {
        kernel.eval_unchecked(self.point(i), self.point(j), self.grad(i), self.grad(j))
    }
}

/// Stein kernel matrix `[k_P(xᵢ, xⱼ)]`. The upper triangle is computed
/// (rows in parallel, each entry independently) and mirrored, so the result
/// is exactly symmetric and does not depend on the thread count.
pub fn stein_gram(kernel: &SteinKernel, pts: &ScoredPoints) -> Result<DMatrix<f64>> {
    let m = pts.len();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (i..m).map(|j| pts.kp(kernel, i, j)).collect())
        .collect();
    let mut gram = DMatrix::zeros(m, m);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("Stein kernel entry ({i}, {j})")));
            }
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    Ok(gram)
}

/// Rectangular matrix `[k_P(aᵢ, bⱼ)]`.
pub fn stein_cross_gram(kernel: &SteinKernel, a: &ScoredPoints, b: &ScoredPoints) -> Result<DMatrix<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let mut out = DMatrix::zeros(a.len(), b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            let v = kernel.eval_unchecked(a.point(i), b.point(j), a.grad(i), b.grad(j));
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("Stein kernel entry ({i}, {j})")));
            }
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Discrepancy of weights `w` on scored points. Squared values that are
/// negative from roundoff are clamped to zero.
pub fn ksd_points(kernel: &SteinKernel, pts: &ScoredPoints, weights: &[f64]) -> Result<f64> {
    if weights.len() != pts.len() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} points",
            weights.len(),
            pts.len()
        )));
    }
    let m = pts.len();
    let partial: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let off: f64 = ((i + 1)..m).map(|j| weights[j] * pts.kp(kernel, i, j)).sum();
            weights[i] * (weights[i] * pts.kp(kernel, i, i) + 2.0 * off)
        })
        .collect();
    let sq: f64 = partial.iter().sum();
    if !sq.is_finite() {
        return Err(Error::NonFinite("squared kernel Stein discrepancy".into()));
    }
    Ok(sq.max(0.0).sqrt())
}

/// Kernel Stein discrepancy of the weighted support drawn from `chain`.
pub fn ksd(kernel: &SteinKernel, support: &WeightedSupport, chain: &ChainOutput) -> Result<f64> {
    support.validate_for(chain.len())?;
    let pts = ScoredPoints::from_chain(chain, kernel, support.indices())?;
    ksd_points(kernel, &pts, support.weights())
}

/// Median pairwise Euclidean distance over at most 1000 evenly spaced
/// states, a common default lengthscale.
pub fn median_heuristic(chain: &ChainOutput) -> Result<f64> {
    let n = chain.len();
    let take = n.min(1000);
    if take < 2 {
        return Err(Error::InvalidInput("median heuristic needs two states".into()));
    }
    let idx: Vec<usize> = (0..take).map(|i| i * n / take).collect();
    let mut dists = Vec::with_capacity(take * (take - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            dists.push(sq_dist(chain.state(i), chain.state(j)).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let med = if dists.len() % 2 == 0 {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    };
    if med <= 0.0 {
        return Err(Error::Degenerate("median pairwise distance is zero".into()));
    }
    Ok(med)
}
