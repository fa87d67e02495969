//! Fixed-capacity rollout storage and generalized advantage estimation.

use serde::{Deserialize, Serialize};

use super::PpoError;

/// How the trajectory continues after a stored transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepEnd {
    Continue,
    /// True termination: the successor state is worth zero.
    Terminal,
    /// Horizon cut: bootstrap with the critic's value of the final observation.
    Truncated { bootstrap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutBuffer {
    obs_dim: usize,
    n_actions: usize,
    capacity: usize,
    pub observations: Vec<f64>,
    pub masks: Vec<bool>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub ends: Vec<StepEnd>,
    /// Critic value of the state following the last transition when it is `Continue`.
    pub last_value: Option<f64>,
}

impl RolloutBuffer {
    pub fn new(obs_dim: usize, n_actions: usize, capacity: usize) -> Self {
        Self {
            obs_dim,
            n_actions,
            capacity,
            observations: Vec::with_capacity(capacity * obs_dim),
            masks: Vec::with_capacity(capacity * n_actions),
            actions: Vec::with_capacity(capacity),
            log_probs: Vec::with_capacity(capacity),
            rewards: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            ends: Vec::with_capacity(capacity),
            last_value: None,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.masks.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.values.clear();
        self.ends.clear();
        self.last_value = None;
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        observation: &[f64],
        mask: &[bool],
        action: usize,
        log_prob: f64,
        reward: f64,
        value: f64,
        end: StepEnd,
    ) {
        assert!(!self.is_full(), "rollout buffer overflow");
        assert_eq!(observation.len(), self.obs_dim);
        assert_eq!(mask.len(), self.n_actions);
        self.observations.extend_from_slice(observation);
        self.masks.extend_from_slice(mask);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.ends.push(end);
    }

    pub fn observation(&self, t: usize) -> &[f64] {
        &self.observations[t * self.obs_dim..(t + 1) * self.obs_dim]
    }

    pub fn mask(&self, t: usize) -> &[bool] {
        &self.masks[t * self.n_actions..(t + 1) * self.n_actions]
    }
}

/// GAE over a full buffer: returns `(advantages, returns)` with
/// `returns = advantages + values`. Advantages are not normalized here.
pub fn compute_advantages(buffer: &RolloutBuffer, gamma: f64, gae_lambda: f64) -> Result<(Vec<f64>, Vec<f64>), PpoError> {
    let n = buffer.len();
    if n == 0 {
        return Err(PpoError::EmptyBuffer);
    }
    if !buffer.is_full() {
        return Err(PpoError::IncompleteBuffer {
            len: n,
            capacity: buffer.capacity(),
        });
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let (next_value, carry) = match buffer.ends[t] {
            StepEnd::Terminal => (0.0, 0.0),
            StepEnd::Truncated { bootstrap } => (bootstrap, 0.0),
            StepEnd::Continue if t + 1 < n => (buffer.values[t + 1], 1.0),
            StepEnd::Continue => (buffer.last_value.ok_or(PpoError::MissingBootstrap)?, 1.0),
        };
        let delta = buffer.rewards[t] + gamma * next_value - buffer.values[t];
        next_adv = delta + gamma * gae_lambda * carry * next_adv;
        adv[t] = next_adv;
    }
    let returns = adv.iter().zip(&buffer.values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Shifts and scales to zero mean and unit (population) variance.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    adv.iter_mut().for_each(|a| *a = (*a - mean) / std);
}
