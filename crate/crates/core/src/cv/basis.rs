//! Stein-operated monomial bases for zero-variance control variates.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stein::ScoredPoints;

/// All multi-indices `α ∈ ℕ₀^d` with `0 < |α| ≤ r`, graded
/// lexicographically: by total degree, then with larger leading exponents
/// first, e.g. `(1,0), (0,1), (2,0), (1,1), (0,2)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolynomialBasis {
    dim: usize,
    degree: usize,
    multi_indices: Vec<Vec<u32>>,
}

fn compositions(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

impl PolynomialBasis {
    /// Degree 0 gives the empty basis (intercept-only designs).
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        let mut multi_indices = Vec::new();
        for t in 1..=degree as u32 {
            compositions(t, dim, &mut Vec::with_capacity(dim), &mut multi_indices);
        }
        Ok(Self {
            dim,
            degree,
            multi_indices,
        })
    }

    /// Number of basis functions `J = C(d + r, d) − 1`.
    pub fn len(&self) -> usize {
        self.multi_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multi_indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn multi_indices(&self) -> &[Vec<u32>] {
        &self.multi_indices
    }
}

/// `A_P(∇ x^α)(x)` for the score `u = ∇ log p(x)`:
///
/// ```text
/// Σⱼ αⱼ [ (αⱼ − 1) xⱼ^(αⱼ−2) + xⱼ^(αⱼ−1) uⱼ ] Πᵢ≠ⱼ xᵢ^αᵢ
/// ```
///
/// with `0⁰ = 1` and the first bracketed term dropped when `αⱼ = 1`.
pub fn stein_monomial(alpha: &[u32], x: &[f64], u: &[f64]) -> Result<f64> {
    if alpha.iter().all(|&a| a == 0) {
        return Err(Error::InvalidInput("multi-index must be non-zero".into()));
    }
    if x.len() != alpha.len() || u.len() != alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: alpha.len(),
            got: if x.len() != alpha.len() { x.len() } else { u.len() },
        });
    }
    Ok(stein_monomial_scaled(alpha, x, u, None))
}

/// Same operator applied to `∇ₓ z^α` where `z = (x − centre) / scale`
/// componentwise; `z` is passed in already transformed.
pub(crate) fn stein_monomial_scaled(alpha: &[u32], z: &[f64], u: &[f64], scale: Option<&[f64]>) -> f64 {
    let mut total = 0.0;
    for j in 0..alpha.len() {
        let aj = alpha[j];
        if aj == 0 {
            continue;
        }
        let others: f64 = (0..alpha.len())
            .filter(|&i| i != j)
            .map(|i| z[i].powi(alpha[i] as i32))
            .product();
        let sj = scale.map_or(1.0, |s| s[j]);
        let second = if aj >= 2 {
            f64::from(aj - 1) * z[j].powi(aj as i32 - 2) / sj
        } else {
            0.0
        };
        let first = z[j].powi(aj as i32 - 1) * u[j];
        total += f64::from(aj) / sj * (second + first) * others;
    }
    total
}

/// Per-coordinate centring and scaling applied to monomial inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardisation {
    pub centre: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardisation {
    pub fn identity(d: usize) -> Self {
        Self {
            centre: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    /// Mean and standard deviation of the points; a zero spread maps to 1.
    pub fn fit(pts: &ScoredPoints) -> Self {
        let (m, d) = (pts.len(), pts.dim());
        let mut centre = vec![0.0; d];
        for i in 0..m {
            for (c, x) in centre.iter_mut().zip(pts.point(i)) {
                *c += x;
            }
        }
        centre.iter_mut().for_each(|c| *c /= m as f64);
        let mut scale = vec![0.0; d];
        for i in 0..m {
            for ((s, x), c) in scale.iter_mut().zip(pts.point(i)).zip(&centre) {
                *s += (x - c) * (x - c);
            }
        }
        for s in &mut scale {
            let sd = (*s / m as f64).sqrt();
            *s = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
        }
        Self { centre, scale }
    }
}

/// Design matrix `[1, A_P φ₁, ..., A_P φ_J]` at the points, built from
/// standardised monomials.
pub(crate) fn design_matrix(
    basis: &PolynomialBasis,
    std: &Standardisation,
    pts: &ScoredPoints,
) -> DMatrix<f64> {
    let m = pts.len();
    let mut phi = DMatrix::zeros(m, basis.len() + 1);
    let mut z = vec![0.0; pts.dim()];
    for i in 0..m {
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = (pts.point(i)[k] - std.centre[k]) / std.scale[k];
        }
        phi[(i, 0)] = 1.0;
        for (col, alpha) in basis.multi_indices().iter().enumerate() {
            phi[(i, col + 1)] = stein_monomial_scaled(alpha, &z, pts.grad(i), Some(&std.scale));
        }
    }
    phi
}

/// Rewrites coefficients on standardised monomials `z^α` as coefficients
/// on raw monomials `x^β`, dropping the constant term (its gradient
/// vanishes).
pub(crate) fn to_raw_coefficients(
    basis: &PolynomialBasis,
    std: &Standardisation,
    coeffs: &[f64],
) -> Vec<f64> {
    let position: std::collections::HashMap<&[u32], usize> = basis
        .multi_indices()
        .iter()
        .enumerate()
        .map(|(k, a)| (a.as_slice(), k))
        .collect();
    let mut raw = vec![0.0; basis.len()];
    for (alpha, &c) in basis.multi_indices().iter().zip(coeffs) {
        // expand Πⱼ ((xⱼ − mⱼ)/sⱼ)^αⱼ over all β ≤ α
        let mut beta = vec![0u32; alpha.len()];
        loop {
            if beta.iter().any(|&b| b > 0) {
                let mut term = c;
                for j in 0..alpha.len() {
                    let (a, b) = (alpha[j], beta[j]);
                    term *= binomial(a, b) as f64 * (-std.centre[j]).powi((a - b) as i32)
                        / std.scale[j].powi(a as i32);
                }
                raw[position[beta.as_slice()]] += term;
            }
            // odometer increment
            let mut j = 0;
            while j < beta.len() && beta[j] == alpha[j] {
                beta[j] = 0;
                j += 1;
            }
            if j == beta.len() {
                break;
            }
            beta[j] += 1;
        }
    }
    raw
}

fn binomial(n: u32, k: u32) -> u64 {
    (1..=u64::from(k)).fold(1, |acc, i| acc * (u64::from(n) + 1 - i) / i)
}
