use nalgebra::{DMatrix, DVector};

use super::basis::{design_matrix, to_raw_coefficients, PolynomialBasis, Standardisation};
use super::{proxy_of, EstimateReport, IntegrandEvals, Method};
use crate::error::{Error, Result};
use crate::linalg::{pinv_full_rank, JitteredCholesky};
use crate::stein::{stein_cross_gram, stein_gram, ScoredPoints, SteinKernel};

/// Weighted least-squares fit of `f` on `[1, A_P φ₁, ..., A_P φ_J]`.
#[derive(Clone, Debug)]
pub struct ZvcvFit {
    basis: PolynomialBasis,
    std: Standardisation,
    /// Intercept followed by coefficients on the standardised basis.
    coeffs: DVector<f64>,
    estimate: f64,
}

impl ZvcvFit {
    /// The fitted intercept `θ̂₁`, the ZVCV estimate.
    pub fn intercept(&self) -> f64 {
        self.estimate
    }

    pub fn basis(&self) -> &PolynomialBasis {
        &self.basis
    }

    /// Coefficients on `A_P ∇x^α` in the original coordinates.
    pub fn coefficients(&self) -> Vec<f64> {
        to_raw_coefficients(&self.basis, &self.std, &self.coeffs.as_slice()[1..])
    }

    /// Fitted `θ̂₁ + Σ ĉ_α A_P ∇x^α` at the given points.
    pub fn predict(&self, pts: &ScoredPoints) -> Result<Vec<f64>> {
        check_dim(self.basis.dim(), pts.dim())?;
        let phi = design_matrix(&self.basis, &self.std, pts);
        Ok((phi * &self.coeffs).iter().copied().collect())
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn check_size(m: usize, basis: &PolynomialBasis, what: &str) -> Result<()> {
    let p = basis.len() + 1;
    if m <= p {
        return Err(Error::InvalidInput(format!(
            "{what} with degree {} in dimension {} fits {p} coefficients and needs more than {p} points, got {m}",
            basis.degree(),
            basis.dim()
        )));
    }
    Ok(())
}

pub fn zvcv_fit(evals: &IntegrandEvals, degree: usize) -> Result<ZvcvFit> {
    let basis = PolynomialBasis::new(evals.dim(), degree)?;
    check_size(evals.len(), &basis, "ZVCV")?;
    let std = Standardisation::fit(evals.points());
    let mut phi = design_matrix(&basis, &std, evals.points());
    let mut rhs = DVector::from_column_slice(evals.f_values());
    for (i, w) in evals.weights().iter().enumerate() {
        let sw = w.sqrt();
        phi.row_mut(i).scale_mut(sw);
        rhs[i] *= sw;
    }
    let pinv = pinv_full_rank(phi).map_err(|e| match e {
        Error::RankDeficient { rank, cols } => Error::Conditioning(format!(
            "ZVCV design has rank {rank} < {cols}; lower the polynomial degree or use more distinct points"
        )),
        other => other,
    })?;
    let coeffs = &pinv * rhs;
    // the intercept is a fixed linear functional vᵀf of the data
    let v: Vec<f64> = evals
        .weights()
        .iter()
        .enumerate()
        .map(|(i, w)| w.sqrt() * pinv[(0, i)])
        .collect();
    let estimate = apply_functional(v, evals.f_values());
    Ok(ZvcvFit {
        basis,
        std,
        coeffs,
        estimate,
    })
}

/// `vᵀf` after rescaling `v` to sum to one, which holds exactly for the
/// functionals here because the design contains a constant column.
fn apply_functional(mut v: Vec<f64>, f: &[f64]) -> f64 {
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v.iter().zip(f).map(|(v, f)| v * f).sum()
}

/// Zero-variance control variates of degree `r`: the intercept of the
/// weighted regression of `f` on the Stein-operated monomials.
pub fn zvcv_estimate(evals: &IntegrandEvals, degree: usize) -> Result<EstimateReport> {
    let fit = zvcv_fit(evals, degree)?;
    let fitted = fit.predict(evals.points())?;
    let corrected: Vec<f64> = evals
        .f_values()
        .iter()
        .zip(&fitted)
        .map(|(f, fh)| f - (fh - fit.coeffs[0]))
        .collect();
    Ok(EstimateReport {
        estimate: finite(fit.intercept())?,
        method: Method::Zvcv,
        proxy: proxy_of(evals.weights(), &corrected),
        coefficients: Some(fit.coefficients()),
        degree: Some(degree),
        lengthscale: None,
        jitter: None,
        n_points: evals.len(),
    })
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("estimate".into()))
    }
}

/// Minimum-norm Stein-RKHS interpolant, optionally with a polynomial part:
/// `f̂(x) = Φ(x) β + Σⱼ aⱼ k_P(x, xⱼ)`.
#[derive(Clone, Debug)]
pub struct KernelFit {
    kernel: SteinKernel,
    support: ScoredPoints,
    poly: Option<(PolynomialBasis, Standardisation)>,
    beta: DVector<f64>,
    alpha: DVector<f64>,
    jitter: f64,
    estimate: f64,
}

impl KernelFit {
    /// The fitted constant, which is the estimate of `∫ f dP`.
    pub fn intercept(&self) -> f64 {
        self.estimate
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn support(&self) -> &ScoredPoints {
        &self.support
    }

    /// Polynomial coefficients in the original coordinates, if any.
    pub fn coefficients(&self) -> Option<Vec<f64>> {
        self.poly
            .as_ref()
            .map(|(b, s)| to_raw_coefficients(b, s, &self.beta.as_slice()[1..]))
    }

    fn design(&self, pts: &ScoredPoints) -> DMatrix<f64> {
        match &self.poly {
            Some((b, s)) => design_matrix(b, s, pts),
            None => DMatrix::from_element(pts.len(), 1, 1.0),
        }
    }

    /// Fitted `f̂` at the given points.
    pub fn predict(&self, pts: &ScoredPoints) -> Result<Vec<f64>> {
        check_dim(self.support.dim(), pts.dim())?;
        let cross = stein_cross_gram(&self.kernel, pts, &self.support)?;
        let out = self.design(pts) * &self.beta + cross * &self.alpha;
        Ok(out.iter().copied().collect())
    }
}

fn kernel_fit(
    evals: &IntegrandEvals,
    kernel: &SteinKernel,
    poly: Option<(PolynomialBasis, Standardisation)>,
) -> Result<(KernelFit, IntegrandEvals, DMatrix<f64>)> {
    if let Some(t) = &kernel.target {
        check_dim(t.dim(), evals.dim())?;
    }
    let evals = evals.deduplicated()?;
    if let Some((b, _)) = &poly {
        check_size(evals.len(), b, "SECF")?;
    }
    let gram = stein_gram(kernel, evals.points())?;
    let chol = JitteredCholesky::new(&gram)?;
    let phi = match &poly {
        Some((b, s)) => design_matrix(b, s, evals.points()),
        None => DMatrix::from_element(evals.len(), 1, 1.0),
    };
    let f = DVector::from_column_slice(evals.f_values());
    let white_phi = chol.whiten_mat(&phi);
    let white_f = chol.whiten_mat(&DMatrix::from_column_slice(f.len(), 1, f.as_slice()));
    let pinv = pinv_full_rank(white_phi).map_err(|e| match e {
        Error::RankDeficient { rank, cols } => Error::Conditioning(format!(
            "kernel-weighted design has rank {rank} < {cols}"
        )),
        other => other,
    })?;
    let beta = &pinv * white_f.column(0);
    let alpha = chol.solve(&(&f - &phi * &beta));
    let v = chol.unwhiten_t(&pinv.row(0).transpose());
    let estimate = apply_functional(v.iter().copied().collect(), evals.f_values());
    if beta.iter().chain(alpha.iter()).chain(&[estimate]).any(|v| !v.is_finite()) {
        return Err(Error::Conditioning("kernel system produced non-finite coefficients".into()));
    }
    let fit = KernelFit {
        kernel: kernel.clone(),
        support: evals.points().clone(),
        poly,
        beta,
        alpha,
        jitter: chol.jitter,
        estimate,
    };
    Ok((fit, evals, gram))
}

/// Control functional fit (constant plus Stein-RKHS interpolant).
pub fn cf_fit(evals: &IntegrandEvals, kernel: &SteinKernel) -> Result<KernelFit> {
    kernel_fit(evals, kernel, None).map(|r| r.0)
}

/// Semi-exact control functional fit of polynomial degree `r`.
pub fn secf_fit(evals: &IntegrandEvals, kernel: &SteinKernel, degree: usize) -> Result<KernelFit> {
    let (fit, _, _) = secf_parts(evals, kernel, degree)?;
    Ok(fit)
}

fn secf_parts(
    evals: &IntegrandEvals,
    kernel: &SteinKernel,
    degree: usize,
) -> Result<(KernelFit, IntegrandEvals, DMatrix<f64>)> {
    let basis = PolynomialBasis::new(evals.dim(), degree)?;
    let dedup = evals.deduplicated()?;
    let std = Standardisation::fit(dedup.points());
    kernel_fit(&dedup, kernel, Some((basis, std)))
}

fn kernel_report(
    method: Method,
    degree: Option<usize>,
    (fit, evals, gram): (KernelFit, IntegrandEvals, DMatrix<f64>),
) -> Result<EstimateReport> {
    let fitted = fit.design(evals.points()) * &fit.beta + gram * &fit.alpha;
    let corrected: Vec<f64> = evals
        .f_values()
        .iter()
        .zip(fitted.iter())
        .map(|(f, fh)| f - (fh - fit.beta[0]))
        .collect();
    Ok(EstimateReport {
        estimate: finite(fit.intercept())?,
        method,
        proxy: proxy_of(evals.weights(), &corrected),
        coefficients: fit.coefficients(),
        degree,
        lengthscale: Some(fit.kernel.base.lengthscale),
        jitter: Some(fit.jitter),
        n_points: evals.len(),
    })
}

/// Control functional estimate `(1ᵀK_P⁻¹1)⁻¹ 1ᵀK_P⁻¹f`. Does not depend on
/// the weights; repeated support points are merged first.
pub fn cf_estimate(evals: &IntegrandEvals, kernel: &SteinKernel) -> Result<EstimateReport> {
    kernel_report(Method::Cf, None, kernel_fit(evals, kernel, None)?)
}

/// Semi-exact control functional estimate
/// `e₁ᵀ(ΦᵀK_P⁻¹Φ)⁻¹ΦᵀK_P⁻¹f` with the degree-`r` ZVCV design `Φ`.
pub fn secf_estimate(evals: &IntegrandEvals, kernel: &SteinKernel, degree: usize) -> Result<EstimateReport> {
    kernel_report(Method::Secf, Some(degree), secf_parts(evals, kernel, degree)?)
}
