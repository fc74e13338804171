//! Bounded FIFO replay store with uniform sampling.

use crate::agent::Transition;
use crate::rng::Rng;

/// Ring buffer of transitions; once full the oldest element is evicted.
#[derive(Debug)]
pub struct ReplayBuffer {
    storage: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            storage: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, transition: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(transition);
        } else {
            self.storage[self.cursor] = transition;
            self.cursor = (self.cursor + 1) % self.capacity;
        }
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.storage.get(index)
    }

    /// `batch_size` independent uniform draws with replacement, or None when
    /// the buffer is empty (caller treats it as a no-op signal).
    pub fn sample_minibatch(&self, batch_size: usize, rng: &mut Rng) -> Option<Vec<&Transition>> {
        if self.storage.is_empty() {
            return None;
        }
        Some(
            (0..batch_size)
                .map(|_| &self.storage[rng.below(self.storage.len())])
                .collect(),
        )
    }

    /// Chronological iteration (oldest first), for tests.
    pub fn iter_in_order(&self) -> impl Iterator<Item = &Transition> {
        let (tail, head) = self.storage.split_at(self.cursor);
        head.iter().chain(tail.iter())
    }
}
