//! Cardinality-constrained integer quadratic programme
//!
//! ```text
//! minimise ½ vᵀ K v + cᵀ v   over v ∈ ℕ₀^B   subject to   Σ v = s
//! ```
//!
//! solved either by enumerating all multisets of size `s` or by greedy
//! construction followed by unit-transfer local search.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of multisets the exhaustive solver will enumerate.
pub const EXHAUSTIVE_CAP: u128 = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IqpMode {
    Exhaustive,
    Heuristic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IqpInstance {
    gram: DMatrix<f64>,
    linear: Vec<f64>,
    cardinality: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IqpSolution {
    /// Copies taken of each item; sums to the cardinality.
    pub multiplicities: Vec<usize>,
    pub objective: f64,
    /// Objective after the greedy phase, before local search (heuristic
    /// mode only).
    pub greedy_objective: Option<f64>,
}

/// `C(b + s − 1, s)`, saturating.
pub fn multiset_count(b: usize, s: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 1..=s as u128 {
        // acc * (b - 1 + i) / i stays integral at every step
        acc = match acc.checked_mul(b as u128 - 1 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}

impl IqpInstance {
    pub fn new(gram: DMatrix<f64>, linear: Vec<f64>, cardinality: usize) -> Result<Self> {
        let b = gram.nrows();
        if b == 0 || gram.ncols() != b {
            return Err(Error::InvalidInput("IQP matrix must be square and non-empty".into()));
        }
        if linear.len() != b {
            return Err(Error::DimensionMismatch {
                expected: b,
                got: linear.len(),
            });
        }
        if cardinality == 0 {
            return Err(Error::InvalidInput("cardinality must be at least 1".into()));
        }
        for i in 0..b {
            for j in 0..i {
                if gram[(i, j)] != gram[(j, i)] {
                    return Err(Error::InvalidInput(format!(
                        "IQP matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if gram.iter().chain(&linear).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("IQP coefficient".into()));
        }
        Ok(Self {
            gram,
            linear,
            cardinality,
        })
    }

    pub fn size(&self) -> usize {
        self.linear.len()
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// `½ vᵀ K v + cᵀ v`.
    pub fn objective(&self, v: &[usize]) -> f64 {
        let mut quad = 0.0;
        let mut lin = 0.0;
        for (a, &va) in v.iter().enumerate() {
            if va == 0 {
                continue;
            }
            let va = va as f64;
            for (b, &vb) in v.iter().enumerate() {
                if vb != 0 {
                    quad += va * vb as f64 * self.gram[(a, b)];
                }
            }
            lin += self.linear[a] * va;
        }
        0.5 * quad + lin
    }

    fn solution(&self, v: Vec<usize>, greedy_objective: Option<f64>) -> IqpSolution {
        IqpSolution {
            objective: self.objective(&v),
            multiplicities: v,
            greedy_objective,
        }
    }
}

pub fn solve_iqp(inst: &IqpInstance, mode: IqpMode) -> Result<IqpSolution> {
    match mode {
        IqpMode::Exhaustive => exhaustive(inst),
        IqpMode::Heuristic => Ok(heuristic(inst)),
    }
}

/// Enumerates non-decreasing index tuples in lexicographic order, keeping
/// the first strict minimiser.
fn exhaustive(inst: &IqpInstance) -> Result<IqpSolution> {
    let (b, s) = (inst.size(), inst.cardinality);
    let count = multiset_count(b, s);
    if count > EXHAUSTIVE_CAP {
        return Err(Error::EnumerationCap {
            count,
            cap: EXHAUSTIVE_CAP,
        });
    }
    let k = &inst.gram;
    let c = &inst.linear;
    let mut tuple = vec![0usize; s];
    let mut best_val = f64::INFINITY;
    let mut best = tuple.clone();
    loop {
        let mut quad = 0.0;
        let mut lin = 0.0;
        for &p in &tuple {
            for &q in &tuple {
                quad += k[(p, q)];
            }
            lin += c[p];
        }
        let val = 0.5 * quad + lin;
        if val < best_val {
            best_val = val;
            best.copy_from_slice(&tuple);
        }
        // advance to the next non-decreasing tuple
        let Some(pos) = (0..s).rev().find(|&i| tuple[i] + 1 < b) else {
            break;
        };
        let next = tuple[pos] + 1;
        for t in &mut tuple[pos..] {
            *t = next;
        }
    }
    let mut v = vec![0usize; b];
    for &i in &best {
        v[i] += 1;
    }
    Ok(inst.solution(v, None))
}

/// Greedy construction then best-improvement unit transfers. The plain
/// greedy start is complemented by one restart per item, each forcing that
/// item as the first pick; the best local optimum wins (earliest start on
/// ties).
fn heuristic(inst: &IqpInstance) -> IqpSolution {
    let b = inst.size();
    let (greedy_v, greedy_objective) = {
        let v = greedy(inst, None);
        let obj = inst.objective(&v);
        (v, obj)
    };
    let mut best_v = local_search(inst, greedy_v);
    let mut best_obj = inst.objective(&best_v);
    for first in 0..b {
        let v = local_search(inst, greedy(inst, Some(first)));
        let obj = inst.objective(&v);
        if obj < best_obj {
            best_obj = obj;
            best_v = v;
        }
    }
    inst.solution(best_v, Some(greedy_objective))
}

/// `Kv + c`.
fn gradient(inst: &IqpInstance, v: &[usize]) -> Vec<f64> {
    let mut grad = inst.linear.clone();
    for (a, &va) in v.iter().enumerate() {
        if va > 0 {
            for (i, g) in grad.iter_mut().enumerate() {
                *g += va as f64 * inst.gram[(i, a)];
            }
        }
    }
    grad
}

/// `s` sequential myopic picks, optionally with the first one fixed.
fn greedy(inst: &IqpInstance, first: Option<usize>) -> Vec<usize> {
    let (b, s) = (inst.size(), inst.cardinality);
    let k = &inst.gram;
    let mut v = vec![0usize; b];
    let mut grad = inst.linear.clone();
    for step in 0..s {
        let pick = match (step, first) {
            (0, Some(f)) => f,
            _ => {
                let mut best = 0;
                let mut best_gain = f64::INFINITY;
                for i in 0..b {
                    let gain = grad[i] + 0.5 * k[(i, i)];
                    if gain < best_gain {
                        best_gain = gain;
                        best = i;
                    }
                }
                best
            }
        };
        v[pick] += 1;
        for (i, g) in grad.iter_mut().enumerate() {
            *g += k[(i, pick)];
        }
    }
    v
}

/// Moves one unit of multiplicity between two items while that strictly
/// lowers the objective, at most `10 B s` sweeps.
fn local_search(inst: &IqpInstance, mut v: Vec<usize>) -> Vec<usize> {
    let (b, s) = (inst.size(), inst.cardinality);
    let k = &inst.gram;
    let mut grad = gradient(inst, &v);
    let tol = 1e-12 * (1.0 + inst.objective(&v).abs());
    for _ in 0..10 * b * s {
        let mut best_delta = -tol;
        let mut mv = None;
        for from in (0..b).filter(|&a| v[a] > 0) {
            for to in (0..b).filter(|&t| t != from) {
                let delta = grad[to] - grad[from]
                    + 0.5 * (k[(from, from)] + k[(to, to)] - 2.0 * k[(from, to)]);
                if delta < best_delta {
                    best_delta = delta;
                    mv = Some((from, to));
                }
            }
        }
        let Some((from, to)) = mv else { break };
        v[from] -= 1;
        v[to] += 1;
        for (i, g) in grad.iter_mut().enumerate() {
            *g += k[(i, to)] - k[(i, from)];
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn random_spd(b: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(b, b, |_, _| rng.random_range(-1.0..1.0));
        let mut g = &a * a.transpose() + DMatrix::identity(b, b) * 0.1;
        for i in 0..b {
            for j in 0..i {
                g[(i, j)] = g[(j, i)];
            }
        }
        g
    }

    #[test]
    fn counts() {
        assert_eq!(multiset_count(6, 3), 56);
        assert_eq!(multiset_count(40, 4), 123_410);
        assert_eq!(multiset_count(5, 1), 5);
        assert_eq!(multiset_count(1, 7), 1);
    }

    #[test]
    fn cardinality_one_picks_the_diagonal_minimum() {
        let gram = DMatrix::from_row_slice(3, 3, &[4.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 6.0]);
        let inst = IqpInstance::new(gram, vec![0.0, 0.5, -1.5], 1).unwrap();
        // ½K_ii + c_i = 2.0, 1.5, 1.5 → lowest index among ties
        for mode in [IqpMode::Exhaustive, IqpMode::Heuristic] {
            let sol = solve_iqp(&inst, mode).unwrap();
            assert_eq!(sol.multiplicities, vec![0, 1, 0]);
            assert_eq!(sol.objective, 1.5);
        }
    }

    #[test]
    fn identity_spreads_multiplicity() {
        let inst = IqpInstance::new(DMatrix::identity(4, 4), vec![0.0; 4], 2).unwrap();
        for mode in [IqpMode::Exhaustive, IqpMode::Heuristic] {
            let sol = solve_iqp(&inst, mode).unwrap();
            assert_eq!(sol.multiplicities.iter().sum::<usize>(), 2);
            assert!(sol.multiplicities.iter().all(|&m| m <= 1));
            assert_eq!(sol.objective, 1.0);
        }
    }

    #[test]
    fn heuristic_agrees_with_enumeration() {
        let mut rng = rng_from_seed(21);
        let mut agree = 0;
        for _ in 0..100 {
            let gram = random_spd(6, &mut rng);
            let lin: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let inst = IqpInstance::new(gram, lin, 3).unwrap();
            let ex = solve_iqp(&inst, IqpMode::Exhaustive).unwrap();
            let he = solve_iqp(&inst, IqpMode::Heuristic).unwrap();
            let tol = 1e-12 * (1.0 + ex.objective.abs());
            assert!(he.objective >= ex.objective - tol);
            assert!(he.objective <= he.greedy_objective.unwrap() + tol);
            if he.objective <= ex.objective + tol {
                agree += 1;
            }
        }
        assert!(agree >= 95, "{agree}");
    }

    #[test]
    fn enumeration_cap_and_validation() {
        let inst = IqpInstance::new(DMatrix::identity(100, 100), vec![0.0; 100], 4).unwrap();
        assert!(matches!(
            solve_iqp(&inst, IqpMode::Exhaustive),
            Err(Error::EnumerationCap { .. })
        ));
        assert_eq!(
            solve_iqp(&inst, IqpMode::Heuristic)
                .unwrap()
                .multiplicities
                .iter()
                .sum::<usize>(),
            4
        );
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(IqpInstance::new(asym, vec![0.0; 2], 1).is_err());
        assert!(IqpInstance::new(DMatrix::identity(2, 2), vec![0.0; 3], 1).is_err());
        assert!(IqpInstance::new(DMatrix::identity(2, 2), vec![0.0; 2], 0).is_err());
    }
}
