use serde::{Deserialize, Serialize};

use super::loss::LossConfig;
use super::PpoError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Transitions per update across all environments; `None` picks `default_n_steps`.
    pub n_steps: Option<usize>,
    pub minibatch_size: usize,
    pub epochs_per_update: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub adam_eps: f64,
    pub total_steps: u64,
    pub seed: u64,
    /// Environments stepped in lockstep; each contributes `n_steps / n_envs` transitions.
    pub n_envs: usize,
    pub hidden: Vec<usize>,
    pub normalize_advantages: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            gamma: 0.966,
            gae_lambda: 0.95,
            lr_start: 1e-4,
            lr_end: 1e-8,
            n_steps: None,
            minibatch_size: 64,
            epochs_per_update: 10,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            adam_eps: 1e-5,
            total_steps: 1_000_000,
            seed: 0,
            n_envs: 1,
            hidden: vec![256, 256],
            normalize_advantages: true,
        }
    }
}

impl TrainerConfig {
    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            clip_epsilon: self.clip_epsilon,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }

    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |field: &'static str, detail: String| Err(PpoError::InvalidConfig { field, detail });
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon", format!("{} not in (0, 1)", self.clip_epsilon));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", format!("{} not in (0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda", format!("{} not in [0, 1]", self.gae_lambda));
        }
        if !(self.lr_end >= 0.0 && self.lr_start >= self.lr_end && self.lr_start.is_finite()) {
            return bad(
                "lr_start",
                format!("need lr_start >= lr_end >= 0, got {} and {}", self.lr_start, self.lr_end),
            );
        }
        for (field, v) in [
            ("value_coef", self.value_coef),
            ("entropy_coef", self.entropy_coef),
            ("max_grad_norm", self.max_grad_norm),
            ("adam_eps", self.adam_eps),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(field, format!("{v} must be finite and non-negative"));
            }
        }
        if self.minibatch_size == 0 || self.epochs_per_update == 0 || self.total_steps == 0 {
            return bad(
                "minibatch_size",
                "minibatch_size, epochs_per_update and total_steps must be positive".into(),
            );
        }
        if self.n_envs == 0 {
            return bad("n_envs", "must be positive".into());
        }
        if let Some(n) = self.n_steps {
            if n == 0 || n % self.n_envs != 0 {
                return bad("n_steps", format!("{n} must be a positive multiple of n_envs"));
            }
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden", format!("{:?} needs at least one positive width", self.hidden));
        }
        Ok(())
    }
}
