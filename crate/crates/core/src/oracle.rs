//! Exact baselines and consensus metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TransitionModel;
use crate::policy::boltzmann_distribution;
use crate::qtable::QTable;
use crate::scalar::Scalar;

/// Fixed point of the network-averaged Bellman operator
/// `Ḡ(Q)(s,a) = (1/N) Σ_i E[r_i(s,a)] + γ Σ_{s'} p^a_{s,s'} max_{a'} Q(s',a')`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OracleQ<T> {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<T>,
    pub iterations: usize,
    /// Final sup-norm change.
    pub residual: T,
    /// Sup-norm change of every sweep.
    pub residuals: Vec<T>,
}

impl<T: Scalar> OracleQ<T> {
    pub fn get(&self, s: usize, a: usize) -> T {
        self.values[s * self.n_actions + a]
    }

    pub fn sup_norm(&self) -> T {
        crate::scalar::max_abs(&self.values)
    }

    /// `max_i ‖Q_i − Q*‖∞`.
    pub fn max_gap(&self, tables: &[QTable<T>]) -> Result<T> {
        let mut gap = T::zero();
        for t in tables {
            if t.n_states() != self.n_states || t.n_actions() != self.n_actions {
                return Err(Error::contract("table shape differs from the oracle"));
            }
            for (q, o) in t.values().iter().zip(&self.values) {
                gap = gap.max((*q - *o).abs());
            }
        }
        Ok(gap)
    }
}

/// One application of `Ḡ`.
pub fn averaged_bellman<T: Scalar>(model: &TransitionModel<T>, gamma: T, q: &[T]) -> Vec<T> {
    let (ns, na) = (model.n_states(), model.n_actions());
    let vmax: Vec<T> = (0..ns)
        .map(|s| q[s * na..(s + 1) * na].iter().copied().fold(T::neg_infinity(), T::max))
        .collect();
    let mut out = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            let cont: T = model.row(s, a).iter().zip(&vmax).map(|(&p, &v)| p * v).sum();
            out.push(model.average_reward(s, a) + gamma * cont);
        }
    }
    out
}

/// Value iteration on `Ḡ` from `Q = 0` until the sup-norm change is at most `tol`.
pub fn value_iteration_averaged<T: Scalar>(model: &TransitionModel<T>, gamma: T, tol: T) -> Result<OracleQ<T>> {
    if !(gamma >= T::zero() && gamma < T::one()) {
        return Err(Error::config("gamma", format!("{gamma} outside [0, 1)")));
    }
    if !(tol > T::zero()) {
        return Err(Error::config("tol", "must be positive"));
    }
    let (ns, na) = (model.n_states(), model.n_actions());
    let mut q = vec![T::zero(); ns * na];
    let mut residuals = Vec::new();
    // Contraction bound on the sweep count plus slack for rounding.
    let r = model.reward_bound().as_f64().max(1e-300);
    let g = gamma.as_f64();
    let bound = if g == 0.0 {
        1
    } else {
        ((tol.as_f64() * (1.0 - g) / r).ln() / g.ln()).ceil().max(1.0) as usize
    };
    let max_sweeps = bound.saturating_mul(2).max(bound + 100);
    loop {
        let next = averaged_bellman(model, gamma, &q);
        let delta = next
            .iter()
            .zip(&q)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        q = next;
        residuals.push(delta);
        if delta <= tol {
            break;
        }
        if residuals.len() >= max_sweeps {
            return Err(Error::Divergence {
                epoch: residuals.len(),
                detail: format!("value iteration residual {delta} above {tol}"),
            });
        }
    }
    Ok(OracleQ {
        n_states: ns,
        n_actions: na,
        values: q,
        iterations: residuals.len(),
        residual: *residuals.last().unwrap(),
        residuals,
    })
}

fn check_common_shape<T: Scalar>(tables: &[QTable<T>]) -> Result<()> {
    let first = tables
        .first()
        .ok_or_else(|| Error::contract("no tables"))?;
    if tables.iter().any(|t| !t.same_shape(first)) {
        return Err(Error::contract(
            "consensus metrics need every agent on the same state space",
        ));
    }
    Ok(())
}

/// Mean over `(s, a)` of `(1/N) Σ_i (Q_i(s,a) − Q̄(s,a))²`.
pub fn consensus_error<T: Scalar>(tables: &[QTable<T>]) -> Result<T> {
    check_common_shape(tables)?;
    let n = T::from_usize_lossy(tables.len());
    let cells = tables[0].values().len();
    let mut total = T::zero();
    for k in 0..cells {
        // Deviations from the first table's value, so equal tables give 0 exactly.
        let pivot = tables[0].values()[k];
        let shift = tables.iter().map(|t| t.values()[k] - pivot).sum::<T>() / n;
        total += tables
            .iter()
            .map(|t| {
                let d = (t.values()[k] - pivot) - shift;
                d * d
            })
            .sum::<T>()
            / n;
    }
    Ok(total / T::from_usize_lossy(cells))
}

/// Mean over agents and states of `Σ_a (π_i(a|s) − π̄(a|s))²`, with `π_i`
/// the Boltzmann policy of agent `i` at `temperature` and `π̄` the
/// agent-average distribution.
pub fn policy_distribution_mse<T: Scalar>(tables: &[QTable<T>], temperature: T) -> Result<T> {
    check_common_shape(tables)?;
    let n = T::from_usize_lossy(tables.len());
    let (ns, na) = (tables[0].n_states(), tables[0].n_actions());
    let mut total = T::zero();
    for s in 0..ns {
        let dists: Vec<Vec<T>> = tables
            .iter()
            .map(|t| boltzmann_distribution(t.row(s), temperature))
            .collect();
        let mean: Vec<T> = (0..na)
            .map(|a| dists.iter().map(|d| d[a]).sum::<T>() / n)
            .collect();
        for d in &dists {
            total += d.iter().zip(&mean).map(|(p, m)| (*p - *m) * (*p - *m)).sum::<T>();
        }
    }
    Ok(total / (n * T::from_usize_lossy(ns)))
}

/// `max_{i,s,a} |Q_i(s,a) − Q̃_i(s,a)|` between paired runs.
pub fn kappa_one_gap<T: Scalar>(runs: &[QTable<T>], reference: &[QTable<T>]) -> Result<T> {
    if runs.len() != reference.len() {
        return Err(Error::contract("paired runs have different agent counts"));
    }
    let mut gap = T::zero();
    for (a, b) in runs.iter().zip(reference) {
        if !a.same_shape(b) {
            return Err(Error::contract("paired tables differ in shape"));
        }
        for (x, y) in a.values().iter().zip(b.values()) {
            gap = gap.max((*x - *y).abs());
        }
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::generate_digital;

    fn chain(gamma_cycle: bool) -> TransitionModel<f64> {
        // Two states, one action, deterministic cycle 0 -> 1 -> 0; r̄ = (1, 0).
        let probs = if gamma_cycle { vec![0.0, 1.0, 1.0, 0.0] } else { vec![1.0, 0.0, 0.0, 1.0] };
        TransitionModel::new(2, 1, 1, probs, vec![1.0, 0.0], 0.0).unwrap()
    }

    #[test]
    fn zero_rewards_give_zero_values() {
        let probs = vec![0.5; 2 * 2 * 2];
        let model = TransitionModel::new(2, 2, 3, probs, vec![0.0; 12], 0.0).unwrap();
        let q = value_iteration_averaged(&model, 0.9, 1e-10).unwrap();
        assert!(q.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_state_cycle_matches_geometric_series() {
        // Reward 1 at even times from s0: Σ_t 0.5^(2t) = 1/(1 − 0.25); from s1 it is delayed one step.
        let gamma: f64 = 0.5;
        let brute0: f64 = (0..200).map(|t| gamma.powi(2 * t)).sum();
        let brute1: f64 = (0..200).map(|t| gamma.powi(2 * t + 1)).sum();
        let q = value_iteration_averaged(&chain(true), gamma, 1e-13).unwrap();
        assert!((q.get(0, 0) - brute0).abs() < 1e-12);
        assert!((q.get(1, 0) - brute1).abs() < 1e-12);
        assert!((brute0 - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn digital_oracle_converges() {
        let model: TransitionModel<f64> = generate_digital(20, 20, 4).unwrap();
        let q = value_iteration_averaged(&model, 0.8, 1e-10).unwrap();
        assert!(q.residual <= 1e-10);
        let g = averaged_bellman(&model, 0.8, &q.values);
        let res = g.iter().zip(&q.values).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(res <= 1e-10 * (1.0 + 0.8) / (1.0 - 0.8));
    }

    #[test]
    fn gamma_must_be_below_one() {
        assert!(value_iteration_averaged(&chain(false), 1.0, 1e-10).is_err());
    }

    #[test]
    fn consensus_error_hand_value() {
        let a = QTable::from_values(2, 2, vec![0.0, 1.0, 1.0, 1.0]).unwrap();
        let b = QTable::from_values(2, 2, vec![2.0, 1.0, 1.0, 1.0]).unwrap();
        let e: f64 = consensus_error(&[a.clone(), b]).unwrap();
        assert!((e - 1.0 / 4.0).abs() < 1e-15);
        assert_eq!(consensus_error(&[a.clone(), a.clone()]).unwrap(), 0.0);
        let c = QTable::from_values(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(consensus_error(&[a, c]).is_err());
    }

    #[test]
    fn opposite_greedy_policies_approach_half() {
        let a = QTable::from_values(1, 2, vec![1.0, 0.0]).unwrap();
        let b = QTable::from_values(1, 2, vec![0.0, 1.0]).unwrap();
        let m: f64 = policy_distribution_mse(&[a.clone(), b], 1e-3).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
        assert_eq!(policy_distribution_mse(&[a.clone(), a], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn identical_runs_have_zero_gap() {
        let a = QTable::from_values(2, 2, vec![0.3, 1.0, -1.0, 2.0]).unwrap();
        assert_eq!(kappa_one_gap(std::slice::from_ref(&a), std::slice::from_ref(&a)).unwrap(), 0.0);
        let b = QTable::from_values(2, 2, vec![0.3, 1.5, -1.0, 2.0]).unwrap();
        assert_eq!(kappa_one_gap(&[a], &[b]).unwrap(), 0.5);
    }
}
