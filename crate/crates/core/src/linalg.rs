use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SVD};

use crate::error::{Error, Result};

/// Relative diagonal jitter levels tried, in order, before giving up.
const JITTER_LEVELS: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Cholesky factor of `K + τ I` for the smallest listed jitter `τ`
/// (relative to the largest diagonal entry) at which factorisation succeeds.
pub(crate) struct JitteredCholesky {
    chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl JitteredCholesky {
    pub fn new(k: &DMatrix<f64>) -> Result<Self> {
        let scale = k.diagonal().amax();
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Conditioning("kernel matrix has no positive diagonal".into()));
        }
        for level in JITTER_LEVELS {
            let jitter = level * scale;
            let mut m = k.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(m) {
                if chol.l_dirty().diagonal().iter().all(|d| *d > 0.0 && d.is_finite()) {
                    return Ok(Self { chol, jitter });
                }
            }
        }
        Err(Error::Conditioning(format!(
            "Cholesky factorisation failed with diagonal jitter up to {:e}",
            JITTER_LEVELS[JITTER_LEVELS.len() - 1] * scale
        )))
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `L⁻¹ B` for the lower factor `L`.
    pub fn whiten_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `L⁻ᵀ x` for the lower factor `L`.
    pub fn unwhiten_t(&self, x: &DVector<f64>) -> DVector<f64> {
        self.chol
            .l_dirty()
            .tr_solve_lower_triangular(x)
            .expect("Cholesky factor has a positive diagonal")
    }
}

/// Moore-Penrose pseudo-inverse via SVD, rejecting rank deficiency
/// (singular values below `1e-10 σ_max`).
pub(crate) fn pinv_full_rank(a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cols = a.ncols();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix entry".into()));
    }
    let svd = SVD::new(a, true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-10 * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < cols || smax <= 0.0 {
        return Err(Error::RankDeficient { rank, cols });
    }
    svd.pseudo_inverse(tol)
        .map_err(|e| Error::Conditioning(e.to_string()))
}
