//! Target distributions, described by the gradient of their log-density
//! and, optionally, by the log-density itself (up to an additive constant).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type LogDensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A target distribution on `R^d`.
///
/// Only the score `u(x) = ∇ log p(x)` is mandatory; the log-density is needed
/// by the Metropolis samplers and by [`grad_check`].
#[derive(Clone)]
pub struct TargetModel {
    dim: usize,
    name: String,
    log_density: Option<Arc<LogDensityFn>>,
    grad: Arc<GradFn>,
}

impl fmt::Debug for TargetModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetModel")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .field("has_log_density", &self.log_density.is_some())
            .finish()
    }
}

impl TargetModel {
    /// Builds a target from a score function alone.
    pub fn from_gradient<G>(dim: usize, grad: G) -> Result<Self>
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            name: "custom".into(),
            log_density: None,
            grad: Arc::new(grad),
        })
    }

    pub fn with_log_density<F>(mut self, log_density: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.log_density = Some(Arc::new(log_density));
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_log_density(&self) -> bool {
        self.log_density.is_some()
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        match &self.log_density {
            Some(f) => Ok(f(x)),
            None => Err(Error::Unsupported(format!(
                "target '{}' has no log-density",
                self.name
            ))),
        }
    }

    /// Evaluates `∇ log p(x)`.
    ///
    /// Panics if `x` does not have length `dim`.
    pub fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "point has wrong dimension");
        let g = (self.grad)(x);
        debug_assert_eq!(g.len(), self.dim);
        g
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// One Gaussian component, kept in factorised form.
#[derive(Clone, Debug)]
struct GaussianComponent {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl GaussianComponent {
    fn new(mean: &[f64], cov: &[Vec<f64>]) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidInput("mean must be non-empty".into()));
        }
        if cov.len() != d || cov.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidInput(format!(
                "covariance must be {d}x{d} to match the mean"
            )));
        }
        let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance entry".into()));
        }
        let scale = m.amax().max(1.0);
        for i in 0..d {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotPositiveDefinite(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let chol = Cholesky::new(m).ok_or_else(|| {
            Error::NotPositiveDefinite("Cholesky factorisation of the covariance failed".into())
        })?;
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_norm = -0.5 * (d as f64 * (2.0 * PI).ln() + log_det);
        Ok(Self {
            mean: DVector::from_column_slice(mean),
            chol,
            log_norm,
        })
    }

    /// Returns `(log N(x), ∇ log N(x))`.
    fn eval(&self, x: &[f64]) -> (f64, DVector<f64>) {
        let diff = DVector::from_column_slice(x) - &self.mean;
        let prec_diff = self.chol.solve(&diff);
        let quad = diff.dot(&prec_diff);
        (self.log_norm - 0.5 * quad, -prec_diff)
    }
}

/// Mixture weights, means and covariances.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GaussianMixtureSpec {
    pub component_weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
}

impl GaussianMixtureSpec {
    /// The two-mode planar mixture used for demonstrations and benchmarks:
    /// equal weights, means `(±1.5, 0)`, identity covariances.
    pub fn benchmark() -> Self {
        let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        Self {
            component_weights: vec![0.5, 0.5],
            means: vec![vec![-1.5, 0.0], vec![1.5, 0.0]],
            covariances: vec![eye.clone(), eye],
        }
    }
}

/// Gaussian target `N(mean, cov)`.
pub fn gaussian_target(mean: &[f64], cov: &[Vec<f64>]) -> Result<TargetModel> {
    let comp = Arc::new(GaussianComponent::new(mean, cov)?);
    let d = mean.len();
    let c_lp = Arc::clone(&comp);
    Ok(TargetModel {
        dim: d,
        name: "gaussian".into(),
        log_density: Some(Arc::new(move |x: &[f64]| c_lp.eval(x).0)),
        grad: Arc::new(move |x: &[f64]| comp.eval(x).1.as_slice().to_vec()),
    })
}

/// Standard normal target in `d` dimensions.
pub fn standard_gaussian(d: usize) -> Result<TargetModel> {
    let cov: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    gaussian_target(&vec![0.0; d], &cov)
}

struct Mixture {
    log_weights: Vec<f64>,
    components: Vec<GaussianComponent>,
}

impl Mixture {
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let evals: Vec<(f64, DVector<f64>)> =
            self.components.iter().map(|c| c.eval(x)).collect();
        let terms: Vec<f64> = evals
            .iter()
            .zip(&self.log_weights)
            .map(|((lp, _), lw)| lw + lp)
            .collect();
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
        let log_p = max + sum.ln();
        let mut grad = vec![0.0; x.len()];
        for (t, (_, g)) in terms.iter().zip(&evals) {
            let resp = (t - log_p).exp();
            for (acc, gi) in grad.iter_mut().zip(g.iter()) {
                *acc += resp * gi;
            }
        }
        (log_p, grad)
    }
}

/// Gaussian mixture target; gradients use responsibilities computed with
/// log-sum-exp so they remain accurate far in the tails.
pub fn mixture_target(spec: &GaussianMixtureSpec) -> Result<TargetModel> {
    let k = spec.component_weights.len();
    if k == 0 {
        return Err(Error::InvalidInput("mixture has no components".into()));
    }
    if spec.means.len() != k || spec.covariances.len() != k {
        return Err(Error::InvalidInput(
            "mixture weights, means and covariances differ in length".into(),
        ));
    }
    if spec.component_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidInput("mixture weights must be nonnegative".into()));
    }
    let total: f64 = spec.component_weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "mixture weights sum to {total}, not 1"
        )));
    }
    let d = spec.means[0].len();
    let mut log_weights = Vec::with_capacity(k);
    let mut components = Vec::with_capacity(k);
    for ((w, mean), cov) in spec
        .component_weights
        .iter()
        .zip(&spec.means)
        .zip(&spec.covariances)
    {
        if mean.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: mean.len(),
            });
        }
        let comp = GaussianComponent::new(mean, cov)?;
        if *w > 0.0 {
            log_weights.push(w.ln());
            components.push(comp);
        }
    }
    let mix = Arc::new(Mixture {
        log_weights,
        components,
    });
    let m_lp = Arc::clone(&mix);
    Ok(TargetModel {
        dim: d,
        name: "mixture".into(),
        log_density: Some(Arc::new(move |x: &[f64]| m_lp.eval(x).0)),
        grad: Arc::new(move |x: &[f64]| mix.eval(x).1),
    })
}

/// Largest absolute difference between the analytic score and central
/// finite differences of the log-density at `x`.
pub fn grad_check(model: &TargetModel, x: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("step size must be positive, got {h}")));
    }
    if !model.has_log_density() {
        return Err(Error::Unsupported(
            "finite-difference check needs a log-density".into(),
        ));
    }
    let g = {
        model.check_dim(x)?;
        model.grad_log_density(x)
    };
    let mut xp = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let up = model.log_density(&xp)?;
        xp[i] = x[i] - h;
        let down = model.log_density(&xp)?;
        xp[i] = x[i];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs());
    }
    Ok(worst)
}

/// One mixture component as it appears in a target document.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComponentDoc {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// JSON description of a built-in target:
/// `{"type":"gaussian","mean":[..],"cov":[[..]]}` or
/// `{"type":"mixture","components":[{"weight":..,"mean":[..],"cov":[[..]]}]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TargetSpec {
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    Mixture {
        components: Vec<ComponentDoc>,
    },
}

impl TargetSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn benchmark() -> Self {
        let spec = GaussianMixtureSpec::benchmark();
        TargetSpec::Mixture {
            components: spec
                .component_weights
                .iter()
                .zip(spec.means)
                .zip(spec.covariances)
                .map(|((w, mean), cov)| ComponentDoc {
                    weight: *w,
                    mean,
                    cov,
                })
                .collect(),
        }
    }

    pub fn build(&self) -> Result<TargetModel> {
        match self {
            TargetSpec::Gaussian { mean, cov } => gaussian_target(mean, cov),
            TargetSpec::Mixture { components } => mixture_target(&GaussianMixtureSpec {
                component_weights: components.iter().map(|c| c.weight).collect(),
                means: components.iter().map(|c| c.mean.clone()).collect(),
                covariances: components.iter().map(|c| c.cov.clone()).collect(),
            }),
        }
    }
}
