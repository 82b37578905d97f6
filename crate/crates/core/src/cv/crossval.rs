use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimators::{cf_fit, secf_fit};
use super::IntegrandEvals;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::stein::SteinKernel;

/// Lengthscales tried when none are given.
pub const DEFAULT_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_FOLDS: usize = 3;

/// Kernel-based estimator whose lengthscale is being selected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "method")]
pub enum KernelMethod {
    Cf,
    Secf { degree: usize },
}

/// Mean held-out error for one lengthscale; `None` if some fold's fit failed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub lengthscale: f64,
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSelection {
    pub lengthscale: f64,
    pub scores: Vec<CvScore>,
}

/// Fold label of each point: a seeded shuffle dealt round-robin.
fn fold_labels(m: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut labels = vec![0; m];
    for (k, &i) in order.iter().enumerate() {
        labels[i] = k % folds;
    }
    labels
}

fn held_out_error(
    evals: &IntegrandEvals,
    kernel: &SteinKernel,
    method: KernelMethod,
    labels: &[usize],
    folds: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for fold in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..evals.len()).partition(|&i| labels[i] == fold);
        let train_evals = evals.subset(&train);
        let train_evals = match train_evals {
            Ok(t) => t,
            // all training weight zero: weights are unused by the kernel fits
            Err(_) => IntegrandEvals::uniform(
                train.iter().map(|&i| evals.f_values()[i]).collect(),
                evals.points().subset(&train),
            )?,
        };
        let test_pts = evals.points().subset(&test);
        let predicted = match method {
            KernelMethod::Cf => cf_fit(&train_evals, kernel)?.predict(&test_pts)?,
            KernelMethod::Secf { degree } => secf_fit(&train_evals, kernel, degree)?.predict(&test_pts)?,
        };
        total += test
            .iter()
            .zip(&predicted)
            .map(|(&i, p)| {
                let r = evals.f_values()[i] - p;
                evals.weights()[i] * r * r
            })
            .sum::<f64>();
    }
    let score = total / folds as f64;
    if score.is_finite() {
        Ok(score)
    } else {
        Err(Error::NonFinite("cross-validation error".into()))
    }
}

/// Picks the base-kernel lengthscale from `grid` minimising the `folds`-fold
/// cross-validated weighted squared prediction error. Ties go to the
/// smaller lengthscale; grid points whose fits fail are skipped.
pub fn cross_validate_kernel(
    evals: &IntegrandEvals,
    kernel: &SteinKernel,
    grid: &[f64],
    folds: usize,
    method: KernelMethod,
    seed: u64,
) -> Result<CvSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("lengthscale grid is empty".into()));
    }
    if let Some(l) = grid.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::InvalidInput(format!("grid lengthscale {l} must be positive and finite")));
    }
    if folds < 2 {
        return Err(Error::InvalidInput("cross-validation needs at least two folds".into()));
    }
    if evals.len() < 2 * folds {
        return Err(Error::InvalidInput(format!(
            "{} points are too few for {folds}-fold cross-validation",
            evals.len()
        )));
    }
    let labels = fold_labels(evals.len(), folds, seed);
    let scores: Vec<CvScore> = grid
        .par_iter()
        .map(|&lengthscale| {
            let score = kernel
                .with_lengthscale(lengthscale)
                .and_then(|k| held_out_error(evals, &k, method, &labels, folds))
                .ok();
            CvScore { lengthscale, score }
        })
        .collect();
    let lengthscale = best_lengthscale(&scores)
        .ok_or_else(|| Error::Conditioning("every lengthscale in the grid failed to fit".into()))?;
    Ok(CvSelection { lengthscale, scores })
}

/// Minimum score, ties broken towards the smaller lengthscale.
fn best_lengthscale(scores: &[CvScore]) -> Option<f64> {
    scores
        .iter()
        .filter_map(|s| s.score.map(|v| (v, s.lengthscale)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .map(|best| best.1)
}
