use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One joint interaction. `actions` is the concatenation of every agent's
/// action vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Experience<T> {
    pub state: Vec<T>,
    pub actions: Vec<T>,
    pub rewards: Vec<T>,
    pub next_state: Vec<T>,
    pub terminal: bool,
}

/// Fixed-capacity ring; the oldest entry is overwritten once full.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<Experience<T>>,
    head: usize,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("deep.buffer_capacity", "must be positive"));
        }
        Ok(ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, e: Experience<T>) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.head] = e;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> Option<&Experience<T>> {
        self.items.get(i)
    }

    /// `size` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::Usage("sampling from an empty replay buffer".into()));
        }
        Ok((0..size).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Vec<&Experience<T>>> {
        Ok(self
            .sample_indices(size, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}
