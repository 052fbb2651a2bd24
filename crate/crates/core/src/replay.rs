//! Fixed-capacity FIFO experience buffer with uniform sampling.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// One environment transition. States are reference counted so consecutive
/// transitions can share the observation between `next_state` and `state`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Arc<[f64]>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Arc<[f64]>,
    pub terminal: bool,
}

impl Transition {
    pub fn new(
        state: impl Into<Arc<[f64]>>,
        action: Vec<f64>,
        reward: f64,
        next_state: impl Into<Arc<[f64]>>,
        terminal: bool,
    ) -> Self {
        Transition {
            state: state.into(),
            action,
            reward,
            next_state: next_state.into(),
            terminal,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.reward.is_finite()
            && self
                .state
                .iter()
                .chain(self.next_state.iter())
                .chain(&self.action)
                .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    write_index: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be >= 1".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            storage: Vec::new(),
            write_index: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Inserts `t`, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::NonFinite("transition".into()));
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.write_index] = t;
        }
        self.write_index = (self.write_index + 1) % self.capacity;
        Ok(())
    }

    /// `n` independent uniform draws, with replacement.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<&Transition>> {
        if self.storage.len() < n || self.storage.is_empty() {
            return Err(Error::InsufficientData {
                needed: n.max(1),
                available: self.storage.len(),
            });
        }
        let len = self.storage.len();
        Ok((0..n)
            .map(|_| &self.storage[rng.random_range(0..len)])
            .collect())
    }

    /// Contents from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.write_index
        };
        self.storage[split..].iter().chain(&self.storage[..split])
    }
}
