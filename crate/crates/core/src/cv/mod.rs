//! Control variate estimators of `∫ f dP` from weighted sample sets.
//!
//! Every estimator takes an [`IntegrandEvals`]: the integrand evaluated at
//! support points, the support weights, and the points with their scores
//! `∇ log p`. Zero-variance control variates ([`zvcv_estimate`]) regress
//! `f` on Stein-operated polynomials, control functionals ([`cf_estimate`])
//! interpolate `f` in the reproducing kernel Hilbert space of a Stein
//! kernel, and [`secf_estimate`] combines the two.

mod basis;
mod crossval;
mod estimators;

pub use basis::{stein_monomial, PolynomialBasis, Standardisation};
pub use crossval::{cross_validate_kernel, CvScore, CvSelection, KernelMethod, DEFAULT_FOLDS, DEFAULT_GRID};
pub use estimators::{
    cf_estimate, cf_fit, secf_estimate, secf_fit, zvcv_estimate, zvcv_fit, KernelFit, ZvcvFit,
};

use serde::{Deserialize, Serialize};

use crate::chain::{ChainOutput, WeightedSupport};
use crate::error::{Error, Result};
use crate::model::TargetModel;
use crate::stein::ScoredPoints;

/// Integrand values, weights and scored points for a weighted sample set.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegrandEvals {
    f_values: Vec<f64>,
    weights: Vec<f64>,
    points: ScoredPoints,
}

impl IntegrandEvals {
    /// Weights must be non-negative and sum to one.
    pub fn new(f_values: Vec<f64>, weights: Vec<f64>, points: ScoredPoints) -> Result<Self> {
        if f_values.is_empty() {
            return Err(Error::InvalidInput("no integrand evaluations".into()));
        }
        if f_values.len() != points.len() || weights.len() != points.len() {
            return Err(Error::InvalidInput(format!(
                "{} integrand values and {} weights for {} points",
                f_values.len(),
                weights.len(),
                points.len()
            )));
        }
        if let Some(i) = f_values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("integrand value at point {i}")));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            f_values,
            weights,
            points,
        })
    }

    pub fn uniform(f_values: Vec<f64>, points: ScoredPoints) -> Result<Self> {
        let m = points.len().max(1);
        Self::new(f_values, vec![1.0 / m as f64; points.len()], points)
    }

    /// Evaluates `f` on the support of `chain`. Scores come from the chain
    /// when cached, otherwise from `target`.
    pub fn from_chain(
        chain: &ChainOutput,
        support: &WeightedSupport,
        target: Option<&TargetModel>,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        support.validate_for(chain.len())?;
        let points = ScoredPoints::from_chain_with(chain, target, support.indices())?;
        let f_values = (0..points.len()).map(|i| f(points.point(i))).collect();
        Self::new(f_values, support.weights().to_vec(), points)
    }

    pub fn len(&self) -> usize {
        self.f_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f_values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &ScoredPoints {
        &self.points
    }

    /// Same points and values with different weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.f_values.clone(), weights, self.points.clone())
    }

    /// Same points and weights with integrand values `g(f)`.
    pub fn map_values(&self, g: impl Fn(f64) -> f64) -> Result<Self> {
        let f = self.f_values.iter().map(|&v| g(v)).collect();
        Self::new(f, self.weights.clone(), self.points.clone())
    }

    /// Rows `idx`, with weights renormalised to sum to one.
    pub(crate) fn subset(&self, idx: &[usize]) -> Result<Self> {
        let total: f64 = idx.iter().map(|&i| self.weights[i]).sum();
        if total <= 0.0 {
            return Err(Error::Degenerate("subset carries no weight".into()));
        }
        let weights = renormalise(idx.iter().map(|&i| self.weights[i] / total).collect());
        let f = idx.iter().map(|&i| self.f_values[i]).collect();
        Self::new(f, weights, self.points.subset(idx))
    }

    /// Merges rows with identical points and scores, summing their weights.
    pub(crate) fn deduplicated(&self) -> Result<Self> {
        let mut seen = std::collections::HashMap::new();
        let mut keep: Vec<usize> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for i in 0..self.len() {
            let key: Vec<u64> = self
                .points
                .point(i)
                .iter()
                .chain(self.points.grad(i))
                .map(|v| v.to_bits())
                .collect();
            match seen.get(&key) {
                Some(&slot) => {
                    if self.f_values[keep[slot]] != self.f_values[i] {
                        return Err(Error::InvalidInput(format!(
                            "points {} and {i} coincide but have different integrand values",
                            keep[slot]
                        )));
                    }
                    weights[slot] += self.weights[i];
                }
                None => {
                    seen.insert(key, keep.len());
                    keep.push(i);
                    weights.push(self.weights[i]);
                }
            }
        }
        if keep.len() == self.len() {
            return Ok(self.clone());
        }
        let f = keep.iter().map(|&i| self.f_values[i]).collect();
        Self::new(f, renormalise(weights), self.points.subset(&keep))
    }
}

/// Rescales to sum exactly to one up to roundoff.
fn renormalise(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Estimator used to produce an [`EstimateReport`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vanilla,
    Zvcv,
    Cf,
    Secf,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Zvcv => "zvcv",
            Method::Cf => "cf",
            Method::Secf => "secf",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(Method::Vanilla),
            "zvcv" => Ok(Method::Zvcv),
            "cf" => Ok(Method::Cf),
            "secf" => Ok(Method::Secf),
            other => Err(Error::InvalidInput(format!(
                "unknown method {other:?}; expected vanilla, zvcv, cf or secf"
            ))),
        }
    }
}

/// Least-squares and empirical-variance proxies of the corrected integrand
/// `f − g`, where `g` is the fitted control variate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proxy {
    pub ls: f64,
    pub ev: f64,
}

/// Output of an estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub method: Method,
    pub proxy: Proxy,
    /// Coefficients on the monomial Stein basis, in the order of
    /// [`PolynomialBasis::multi_indices`], for the original coordinates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    pub lengthscale: Option<f64>,
    /// Diagonal jitter added to the Stein kernel matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
    /// Number of distinct support points used.
    pub n_points: usize,
}

fn weighted_mean(w: &[f64], f: &[f64]) -> f64 {
    w.iter().zip(f).map(|(w, f)| w * f).sum()
}

fn weighted_variance(w: &[f64], f: &[f64]) -> f64 {
    let mean = weighted_mean(w, f);
    w.iter().zip(f).map(|(w, f)| w * (f - mean) * (f - mean)).sum()
}

fn proxy_of(w: &[f64], values: &[f64]) -> Proxy {
    Proxy {
        ls: w.iter().zip(values).map(|(w, f)| w * f * f).sum(),
        ev: weighted_variance(w, values),
    }
}

/// Weighted sample average `Σ wᵢ fᵢ`.
pub fn vanilla_estimate(evals: &IntegrandEvals) -> EstimateReport {
    EstimateReport {
        estimate: weighted_mean(evals.weights(), evals.f_values()),
        method: Method::Vanilla,
        proxy: proxy_of(evals.weights(), evals.f_values()),
        coefficients: None,
        degree: None,
        lengthscale: None,
        jitter: None,
        n_points: evals.len(),
    }
}

/// `Σ wᵢ (fᵢ − Σⱼ wⱼ fⱼ)²`.
pub fn empirical_variance(evals: &IntegrandEvals) -> Result<f64> {
    if evals.len() < 2 {
        return Err(Error::InvalidInput("empirical variance needs at least two points".into()));
    }
    Ok(weighted_variance(evals.weights(), evals.f_values()))
}

/// `Σ wᵢ fᵢ²`, an upper bound on [`empirical_variance`].
pub fn least_squares_proxy(evals: &IntegrandEvals) -> f64 {
    proxy_of(evals.weights(), evals.f_values()).ls
}

/// Test integrand `1 + x + x² + sin(πx) e^(−x²)`, whose expectation under
/// the unit Gaussian is [`TOY_TRUTH`].
pub fn toy_integrand(x: f64) -> f64 {
    1.0 + x + x * x + (std::f64::consts::PI * x).sin() * (-x * x).exp()
}

pub const TOY_TRUTH: f64 = 2.0;

/// One replicate of the toy comparison: `m` iid unit-Gaussian draws from
/// `seed`, estimated by vanilla Monte Carlo, degree-2 ZVCV, and CF and
/// degree-2 SECF with a Gaussian base kernel, lengthscales chosen by
/// cross-validation over `grid`.
pub fn toy_replicate(seed: u64, m: usize, grid: &[f64], folds: usize) -> Result<[EstimateReport; 4]> {
    use rand_distr::{Distribution, StandardNormal};

    let mut rng = crate::rng::rng_from_seed(seed);
    let xs: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
    let grads: Vec<f64> = xs.iter().map(|x| -x).collect();
    let f: Vec<f64> = xs.iter().map(|&x| toy_integrand(x)).collect();
    let evals = IntegrandEvals::uniform(f, ScoredPoints::new(1, xs, grads)?)?;
    let kernel = crate::stein::SteinKernel::new(crate::stein::BaseKernel::gaussian(1.0)?, None)?;
    let cv_seed = crate::rng::derive_seed(seed, 1);
    let cf_l = cross_validate_kernel(&evals, &kernel, grid, folds, KernelMethod::Cf, cv_seed)?.lengthscale;
    let secf_l = cross_validate_kernel(&evals, &kernel, grid, folds, KernelMethod::Secf { degree: 2 }, cv_seed)?
        .lengthscale;
    Ok([
        vanilla_estimate(&evals),
        zvcv_estimate(&evals, 2)?,
        cf_estimate(&evals, &kernel.with_lengthscale(cf_l)?)?,
        secf_estimate(&evals, &kernel.with_lengthscale(secf_l)?, 2)?,
    ])
}

#[cfg(test)]
mod tests;
