use ndarray::Array2;
use rand::seq::index;
use rand::Rng;

use crate::scalar::Scalar;

/// `(s, a, u, s')` with QoS states packed into bit masks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<T> {
    pub state: u64,
    pub action: usize,
    pub reward: T,
    pub next_state: u64,
}

/// Fixed-capacity ring buffer of transitions.
#[derive(Debug, Clone)]
pub struct ReplayMemory<T> {
    capacity: usize,
    state_bits: usize,
    buffer: Vec<Transition<T>>,
    next: usize,
}

impl<T: Scalar> ReplayMemory<T> {
    pub fn new(capacity: usize, state_bits: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        assert!(state_bits <= 64, "states are packed into 64 bits");
        Self {
            capacity,
            state_bits,
            buffer: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn push(&mut self, transition: Transition<T>) {
        if self.buffer.len() < self.capacity {
            self.buffer.push(transition);
        } else {
            self.buffer[self.next] = transition;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, idx: usize) -> Option<&Transition<T>> {
        self.buffer.get(idx)
    }

    /// Buffer indices of a uniform minibatch drawn without replacement;
    /// returns every index when fewer than `size` are stored.
    pub fn sample_indices<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Vec<usize> {
        let amount = size.min(self.buffer.len());
        index::sample(rng, self.buffer.len(), amount).into_vec()
    }

    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Minibatch<T> {
        let picked: Vec<&Transition<T>> = self
            .sample_indices(size, rng)
            .into_iter()
            .map(|i| &self.buffer[i])
            .collect();
        let rows = picked.len();
        let mut states = Array2::zeros((rows, self.state_bits));
        let mut next_states = Array2::zeros((rows, self.state_bits));
        for (r, t) in picked.iter().enumerate() {
            for b in 0..self.state_bits {
                if t.state >> b & 1 == 1 {
                    states[[r, b]] = T::one();
                }
                if t.next_state >> b & 1 == 1 {
                    next_states[[r, b]] = T::one();
                }
            }
        }
        Minibatch {
            states,
            actions: picked.iter().map(|t| t.action).collect(),
            rewards: picked.iter().map(|t| t.reward).collect(),
            next_states,
        }
    }
}

/// Dense view of sampled transitions, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch<T> {
    pub states: Array2<T>,
    pub actions: Vec<usize>,
    pub rewards: Vec<T>,
    pub next_states: Array2<T>,
}
