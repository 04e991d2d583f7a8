//! Behaviour and evaluation policies over a row of action values.

use rand::Rng;

use crate::mdp::ActionId;
use crate::qtable::argmax;
use crate::scalar::Scalar;

/// Greedy with probability `1 − ε` (lowest index on ties), uniform otherwise.
pub fn epsilon_greedy<T: Scalar, R: Rng + ?Sized>(row: &[T], epsilon: f64, rng: &mut R) -> ActionId {
    assert!(!row.is_empty(), "empty action row");
    if rng.random::<f64>() < epsilon {
        ActionId(rng.random_range(0..row.len()))
    } else {
        argmax(row)
    }
}

/// `softmax(row / temperature)`.
pub fn boltzmann_distribution<T: Scalar>(row: &[T], temperature: T) -> Vec<T> {
    assert!(!row.is_empty(), "empty action row");
    assert!(temperature > T::zero(), "temperature must be positive");
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = row.iter().map(|&q| ((q - m) / temperature).exp()).collect();
    let z: T = e.iter().copied().sum();
    e.into_iter().map(|x| x / z).collect()
}
