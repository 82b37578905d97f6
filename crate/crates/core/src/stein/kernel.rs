use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    /// `(c² + ‖x−y‖²/λ²)^β`
    Imq,
    /// `exp(−‖x−y‖²/λ²)`
    Gaussian,
}

fn default_one() -> f64 {
    1.0
}

fn default_beta() -> f64 {
    -0.5
}

/// Radial base kernel. Serialises as
/// `{"family":"imq","lengthscale":1.0,"c":1.0,"beta":-0.5}`; `c` and `beta`
/// are ignored by the Gaussian family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseKernel {
    pub family: KernelFamily,
    #[serde(default = "default_one")]
    pub lengthscale: f64,
    #[serde(default = "default_one")]
    pub c: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

impl Default for BaseKernel {
    fn default() -> Self {
        Self {
            family: KernelFamily::Imq,
            lengthscale: 1.0,
            c: 1.0,
            beta: -0.5,
        }
    }
}

/// Radial profile at squared distance `r2`: the kernel value `k`, the
/// scalar `a` with `∇ₓk = a (x − y)`, and the mixed term `∇ₓ·∇ᵧk`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Radial {
    pub k: f64,
    pub a: f64,
    pub div: f64,
}

/// Kernel value and first derivatives at a pair of points.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelDerivs {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    /// `Σᵢ ∂²k / ∂xᵢ∂yᵢ`
    pub div_xy: f64,
}

impl BaseKernel {
    pub fn imq(c: f64, beta: f64, lengthscale: f64) -> Result<Self> {
        let k = Self {
            family: KernelFamily::Imq,
            lengthscale,
            c,
            beta,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn gaussian(lengthscale: f64) -> Result<Self> {
        let k = Self {
            family: KernelFamily::Gaussian,
            lengthscale,
            ..Self::default()
        };
        k.validate()?;
        Ok(k)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let k: Self = serde_json::from_str(text)?;
        k.validate()?;
        Ok(k)
    }

    pub fn with_lengthscale(self, lengthscale: f64) -> Result<Self> {
        let k = Self {
            lengthscale,
            ..self
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "lengthscale must be positive, got {}",
                self.lengthscale
            )));
        }
        if self.family == KernelFamily::Imq {
            if !(self.c > 0.0 && self.c.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "IMQ offset c must be positive, got {}",
                    self.c
                )));
            }
            if !(self.beta > -1.0 && self.beta < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "IMQ exponent must lie in (-1, 0), got {}",
                    self.beta
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn radial(&self, r2: f64, d: usize) -> Radial {
        let l2 = self.lengthscale * self.lengthscale;
        let df = d as f64;
        match self.family {
            KernelFamily::Imq => {
                let q = self.c * self.c + r2 / l2;
                let beta = self.beta;
                let q_b1 = q.powf(beta - 1.0);
                let k = q_b1 * q;
                let a = 2.0 * beta * q_b1 / l2;
                let div = -2.0 * beta * df * q_b1 / l2
                    - 4.0 * beta * (beta - 1.0) * (q_b1 / q) * r2 / (l2 * l2);
                Radial { k, a, div }
            }
            KernelFamily::Gaussian => {
                let k = (-r2 / l2).exp();
                let a = -2.0 * k / l2;
                let div = k * (2.0 * df / l2 - 4.0 * r2 / (l2 * l2));
                Radial { k, a, div }
            }
        }
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.radial(sq_dist(x, y), x.len()).k
    }

    /// Closed-form value and derivatives; `grad_y = −grad_x` for these
    /// radial kernels.
    pub fn derivs(&self, x: &[f64], y: &[f64]) -> Result<KernelDerivs> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        let r = self.radial(sq_dist(x, y), x.len());
        let grad_x: Vec<f64> = x.iter().zip(y).map(|(a, b)| r.a * (a - b)).collect();
        let grad_y = grad_x.iter().map(|g| -g).collect();
        Ok(KernelDerivs {
            value: r.k,
            grad_x,
            grad_y,
            div_xy: r.div,
        })
    }
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}
