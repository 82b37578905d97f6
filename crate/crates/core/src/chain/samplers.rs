use rand::Rng;
use rand_distr::StandardNormal;

use super::{ChainMeta, ChainOutput};
use crate::error::{Error, Result};
use crate::model::TargetModel;
use crate::rng::rng_from_seed;

fn check_start(target: &TargetModel, x0: &[f64], n_steps: usize) -> Result<f64> {
    if n_steps == 0 {
        return Err(Error::InvalidInput("number of steps must be positive".into()));
    }
    if x0.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: x0.len(),
        });
    }
    let lp = target.log_density(x0)?;
    if !lp.is_finite() {
        return Err(Error::NonFinite(format!("log-density at the initial state is {lp}")));
    }
    Ok(lp)
}

fn check_scale(scale: f64, what: &str) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} must be positive, got {scale}")));
    }
    Ok(())
}

/// Random-walk Metropolis-Hastings with an isotropic Gaussian proposal.
///
/// The returned chain holds `X_1..X_N` (the initial state is kept
/// separately) with the scores at every state.
pub fn rwmh_sample(
    target: &TargetModel,
    x0: &[f64],
    n_steps: usize,
    proposal_scale: f64,
    seed: u64,
) -> Result<ChainOutput> {
    check_scale(proposal_scale, "proposal scale")?;
    let mut lp = check_start(target, x0, n_steps)?;
    let d = target.dim();
    let mut rng = rng_from_seed(seed);
    let mut x = x0.to_vec();
    let mut g = target.grad_log_density(&x);
    let mut states = Vec::with_capacity(n_steps * d);
    let mut grads = Vec::with_capacity(n_steps * d);
    let mut accepted = 0usize;
    let mut prop = vec![0.0; d];
    for _ in 0..n_steps {
        for (p, xi) in prop.iter_mut().zip(&x) {
            let z: f64 = rng.sample(StandardNormal);
            *p = xi + proposal_scale * z;
        }
        let lp_prop = target.log_density(&prop)?;
        let log_u: f64 = rng.random::<f64>().ln();
        if lp_prop.is_finite() && log_u < lp_prop - lp {
            x.copy_from_slice(&prop);
            lp = lp_prop;
            g = target.grad_log_density(&x);
            accepted += 1;
        }
        states.extend_from_slice(&x);
        grads.extend_from_slice(&g);
    }
    Ok(ChainOutput::from_parts(
        d,
        states,
        Some(grads),
        x0.to_vec(),
        ChainMeta {
            seed: Some(seed),
            sampler: "rwmh".into(),
            acceptance_rate: Some(accepted as f64 / n_steps as f64),
        },
    ))
}

/// Metropolis-adjusted Langevin algorithm with step size `h`:
/// proposal `x + (h²/2) ∇log p(x) + h ξ`.
pub fn mala_sample(
    target: &TargetModel,
    x0: &[f64],
    n_steps: usize,
    step_size: f64,
    seed: u64,
) -> Result<ChainOutput> {
    check_scale(step_size, "step size")?;
    let mut lp = check_start(target, x0, n_steps)?;
    let d = target.dim();
    let half_h2 = 0.5 * step_size * step_size;
    let mut rng = rng_from_seed(seed);
    let mut x = x0.to_vec();
    let mut g = target.grad_log_density(&x);
    let mut states = Vec::with_capacity(n_steps * d);
    let mut grads = Vec::with_capacity(n_steps * d);
    let mut accepted = 0usize;
    let mut prop = vec![0.0; d];
    // log q(to | from) up to a constant, with the drift evaluated at `from`
    let log_q = |to: &[f64], from: &[f64], g_from: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..to.len() {
            let r = to[i] - from[i] - half_h2 * g_from[i];
            s += r * r;
        }
        -s / (4.0 * half_h2)
    };
    for _ in 0..n_steps {
        for i in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            prop[i] = x[i] + half_h2 * g[i] + step_size * z;
        }
        let lp_prop = target.log_density(&prop)?;
        let log_u: f64 = rng.random::<f64>().ln();
        if lp_prop.is_finite() {
            let g_prop = target.grad_log_density(&prop);
            let log_alpha =
                lp_prop - lp + log_q(&x, &prop, &g_prop) - log_q(&prop, &x, &g);
            if log_u < log_alpha {
                x.copy_from_slice(&prop);
                lp = lp_prop;
                g = g_prop;
                accepted += 1;
            }
        }
        states.extend_from_slice(&x);
        grads.extend_from_slice(&g);
    }
    Ok(ChainOutput::from_parts(
        d,
        states,
        Some(grads),
        x0.to_vec(),
        ChainMeta {
            seed: Some(seed),
            sampler: "mala".into(),
            acceptance_rate: Some(accepted as f64 / n_steps as f64),
        },
    ))
}
