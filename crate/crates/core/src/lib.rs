//! Post-processing of Markov chain Monte Carlo output.
//!
//! * [`chain`]: chain storage, random-walk and Langevin samplers, R-hat,
//!   effective sample size, burn-in and fixed-frequency thinning.
//! * [`stein`]: Stein kernels and kernel Stein discrepancy.
//! * [`thin`]: greedy and look-ahead Stein thinning.
//! * [`cv`]: control variate estimators (ZVCV, control functionals,
//!   semi-exact control functionals).

pub mod chain;
pub mod cv;
pub mod error;
mod linalg;
pub mod model;
pub mod rng;
pub mod stein;
pub mod thin;

pub use error::{Error, Result};
