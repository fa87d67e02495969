//! One PPO update: several epochs of shuffled minibatch Adam steps.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{compute_advantages, normalize_advantages, RolloutBuffer};
use super::config::TrainerConfig;
use super::loss::{ppo_loss, Minibatch};
use super::net::PolicyParams;
use super::optim::{clip_grad_norm, Adam};
use super::PpoError;

/// Flattened samples of one or more full buffers, ready for minibatching.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub observations: Array2<f64>,
    pub masks: Vec<bool>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    n_actions: usize,
}

impl TrainingBatch {
    /// Runs GAE per buffer, concatenates, then normalizes advantages over the whole batch if asked.
    pub fn from_buffers(buffers: &[RolloutBuffer], config: &TrainerConfig) -> Result<Self, PpoError> {
        let first = buffers.first().ok_or(PpoError::EmptyBuffer)?;
        let (d, n) = (first.obs_dim(), first.n_actions());
        let total: usize = buffers.iter().map(RolloutBuffer::len).sum();
        let mut obs = Vec::with_capacity(total * d);
        let mut out = Self {
            observations: Array2::zeros((0, d)),
            masks: Vec::with_capacity(total * n),
            actions: Vec::with_capacity(total),
            old_log_probs: Vec::with_capacity(total),
            advantages: Vec::with_capacity(total),
            returns: Vec::with_capacity(total),
            n_actions: n,
        };
        for buf in buffers {
            let (adv, ret) = compute_advantages(buf, config.gamma, config.gae_lambda)?;
            obs.extend_from_slice(&buf.observations);
            out.masks.extend_from_slice(&buf.masks);
            out.actions.extend_from_slice(&buf.actions);
            out.old_log_probs.extend_from_slice(&buf.log_probs);
            out.advantages.extend(adv);
            out.returns.extend(ret);
        }
        if config.normalize_advantages {
            normalize_advantages(&mut out.advantages);
        }
        out.observations = Array2::from_shape_vec((total, d), obs).expect("rows of obs_dim");
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

/// Averages over all minibatch steps of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub lr: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    /// `|clipped - unclipped|` objective on the very first minibatch, before any step.
    pub initial_objective_gap: f64,
    /// Clip fraction on the very first minibatch, before any step.
    pub initial_clip_fraction: f64,
    /// Largest per-sample excess over the clip bound seen in this update.
    pub max_bound_excess: f64,
    pub minibatches: usize,
}

/// Runs `epochs_per_update` shuffled passes of clipped-surrogate Adam steps at rate `lr`.
pub fn ppo_update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    optimizer: &mut Adam,
    batch: &TrainingBatch,
    config: &TrainerConfig,
    lr: f64,
    rng: &mut R,
) -> Result<UpdateMetrics, PpoError> {
    if batch.is_empty() {
        return Err(PpoError::EmptyBuffer);
    }
    let n = batch.n_actions;
    let loss_cfg = config.loss_config();
    let mut idx: Vec<usize> = (0..batch.len()).collect();
    let mut grad = params.zeros_like();
    let mut m = UpdateMetrics {
        lr,
        max_bound_excess: f64::NEG_INFINITY,
        ..UpdateMetrics::default()
    };
    let (mut masks, mut actions, mut old, mut adv, mut ret) = (vec![], vec![], vec![], vec![], vec![]);
    for _ in 0..config.epochs_per_update {
        idx.shuffle(rng);
        for chunk in idx.chunks(config.minibatch_size) {
            let obs = batch.observations.select(Axis(0), chunk);
            masks.clear();
            actions.clear();
            old.clear();
            adv.clear();
            ret.clear();
            for &i in chunk {
                masks.extend_from_slice(&batch.masks[i * n..(i + 1) * n]);
                actions.push(batch.actions[i]);
                old.push(batch.old_log_probs[i]);
                adv.push(batch.advantages[i]);
                ret.push(batch.returns[i]);
            }
            let mb = Minibatch {
                observations: obs.view(),
                masks: &masks,
                actions: &actions,
                old_log_probs: &old,
                advantages: &adv,
                returns: &ret,
            };
            grad.scale(0.0);
            let s = ppo_loss(params, &mb, &loss_cfg, Some(&mut grad))?;
            if !s.total.is_finite() {
                return Err(PpoError::NonFinite {
                    step: 0,
                    update: 0,
                    detail: format!(
                        "loss {} (policy {}, value {}, entropy {})",
                        s.total, s.policy_loss, s.value_loss, s.entropy
                    ),
                });
            }
            if m.minibatches == 0 {
                m.initial_objective_gap = (s.clipped_objective - s.unclipped_objective).abs();
                m.initial_clip_fraction = s.clip_fraction;
            }
            let norm = clip_grad_norm(&mut grad, config.max_grad_norm);
            optimizer.step(params, &grad, lr);
            m.minibatches += 1;
            m.policy_loss += s.policy_loss;
            m.value_loss += s.value_loss;
            m.entropy += s.entropy;
            m.clip_fraction += s.clip_fraction;
            m.approx_kl += s.approx_kl;
            m.grad_norm += norm;
            m.max_bound_excess = m.max_bound_excess.max(s.max_bound_excess);
        }
    }
    let k = m.minibatches as f64;
    m.policy_loss /= k;
    m.value_loss /= k;
    m.entropy /= k;
    m.clip_fraction /= k;
    m.approx_kl /= k;
    m.grad_norm /= k;
    Ok(m)
}
