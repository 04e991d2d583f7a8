use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::ActionId;
use crate::scalar::Scalar;

/// Dense `(state, action) → value` table with per-pair visit counters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct QTable<T> {
    n_states: usize,
    n_actions: usize,
    values: Vec<T>,
    visits: Vec<u64>,
}

impl<T: Scalar> QTable<T> {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        QTable {
            n_states,
            n_actions,
            values: vec![T::zero(); n_states * n_actions],
            visits: vec![0; n_states * n_actions],
        }
    }

    /// Entries drawn uniformly from `[-c, c]`.
    pub fn uniform<R: Rng + ?Sized>(n_states: usize, n_actions: usize, c: f64, rng: &mut R) -> Self {
        let mut t = Self::zeros(n_states, n_actions);
        for v in &mut t.values {
            *v = T::lit(rng.random_range(-c..=c));
        }
        t
    }

    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::contract(format!(
                "{} values for a {n_states}x{n_actions} table",
                values.len()
            )));
        }
        Ok(QTable {
            n_states,
            n_actions,
            values,
            visits: vec![0; n_states * n_actions],
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_states == other.n_states && self.n_actions == other.n_actions
    }

    #[inline]
    fn at(&self, s: usize, a: ActionId) -> usize {
        debug_assert!(s < self.n_states && a.0 < self.n_actions);
        s * self.n_actions + a.0
    }

    #[inline]
    pub fn get(&self, s: usize, a: ActionId) -> T {
        self.values[self.at(s, a)]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: ActionId, v: T) {
        let k = self.at(s, a);
        self.values[k] = v;
    }

    pub fn visits(&self, s: usize, a: ActionId) -> u64 {
        self.visits[self.at(s, a)]
    }

    pub(crate) fn record_visit(&mut self, s: usize, a: ActionId) {
        let k = self.at(s, a);
        self.visits[k] += 1;
    }

    pub fn min_visits(&self) -> u64 {
        self.visits.iter().copied().min().unwrap_or(0)
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visits
    }

    pub fn max_value(&self, s: usize) -> T {
        self.row(s).iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Greedy action; ties resolve to the lowest index.
    pub fn argmax(&self, s: usize) -> ActionId {
        argmax(self.row(s))
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        crate::scalar::all_finite(&self.values)
    }
}

pub(crate) fn argmax<T: Scalar>(row: &[T]) -> ActionId {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    ActionId(best)
}
