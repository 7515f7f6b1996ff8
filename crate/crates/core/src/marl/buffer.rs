//! On-policy rollout storage.

use ndarray::Array2;

use crate::env::Action;

/// Transitions collected since the last update. Cleared after every update.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    width: usize,
    capacity: usize,
    observations: Vec<f64>,
    pub actions: Vec<Action>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl RolloutBuffer {
    pub fn new(width: usize, capacity: usize) -> Self {
        Self {
            width,
            capacity,
            observations: Vec::with_capacity(width * capacity),
            actions: Vec::with_capacity(capacity),
            log_probs: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            rewards: Vec::with_capacity(capacity),
            dones: Vec::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, observation: &[f64], action: Action, log_prob: f64, value: f64, reward: f64, done: bool) {
        assert_eq!(observation.len(), self.width, "observation width");
        assert!(!self.is_full(), "rollout buffer overflow");
        self.observations.extend_from_slice(observation);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.values.push(value);
        self.rewards.push(reward);
        self.dones.push(done);
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() >= self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.observations[i * self.width..(i + 1) * self.width]
    }

    /// Observations as a `len x width` matrix.
    pub fn observation_matrix(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.len(), self.width), self.observations.clone()).expect("buffer shape")
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.values.clear();
        self.rewards.clear();
        self.dones.clear();
    }
}
