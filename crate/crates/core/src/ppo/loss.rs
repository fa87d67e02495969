//! Clipped surrogate loss with its analytic gradient.
//!
//! `loss = -mean(min(r A, clip(r, 1-eps, 1+eps) A)) + value_coef * mean((V - R)^2) - entropy_coef * mean(H)`
//! where `r = exp(log_prob - old_log_prob)` is evaluated under the mask stored
//! at collection time.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::dist::masked_log_softmax;
use super::net::PolicyParams;
use super::PpoError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// A borrowed slice of training samples; `masks` is row-major `len x n_actions`.
#[derive(Debug, Clone, Copy)]
pub struct Minibatch<'a> {
    pub observations: ArrayView2<'a, f64>,
    pub masks: &'a [bool],
    pub actions: &'a [usize],
    pub old_log_probs: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

impl Minibatch<'_> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub total: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Fraction of samples with `|r - 1| > eps`.
    pub clip_fraction: f64,
    /// Mean of `(r - 1) - ln r`.
    pub approx_kl: f64,
    /// Mean of `min(r A, clip(r) A)`.
    pub clipped_objective: f64,
    /// Mean of `r A`.
    pub unclipped_objective: f64,
    /// Largest `objective - bound` over samples, with bound `(1+eps)A` for
    /// `A > 0` and `(1-eps)A` for `A < 0`. Never positive.
    pub max_bound_excess: f64,
}

/// Evaluates the loss; when `grad` is given, adds its gradient into it.
pub fn ppo_loss(
    params: &PolicyParams,
    batch: &Minibatch<'_>,
    config: &LossConfig,
    grad: Option<&mut PolicyParams>,
) -> Result<LossStats, PpoError> {
    let b = batch.len();
    if b == 0 {
        return Err(PpoError::EmptyBuffer);
    }
    let n = params.n_actions();
    let obs_dim = batch.observations.ncols();
    if obs_dim != params.obs_dim() {
        return Err(PpoError::ShapeMismatch {
            expected: params.obs_dim(),
            found: obs_dim,
        });
    }
    let eps = config.clip_epsilon;
    let inv_b = 1.0 / b as f64;

    let actor_cache = params.actor.forward(batch.observations);
    let critic_cache = params.critic.forward(batch.observations);
    let logits = actor_cache.output();
    let values = critic_cache.output();

    let mut d_logits = Array2::<f64>::zeros((b, n));
    let mut d_values = Array2::<f64>::zeros((b, 1));
    let mut s = LossStats {
        max_bound_excess: f64::NEG_INFINITY,
        ..LossStats::default()
    };
    let mut clipped = 0usize;

    for i in 0..b {
        let mask = &batch.masks[i * n..(i + 1) * n];
        let row = logits.row(i);
        let logp = masked_log_softmax(row.as_slice().expect("standard layout"), mask)?;
        let a = batch.actions[i];
        let adv = batch.advantages[i];
        let log_ratio = logp[a] - batch.old_log_probs[i];
        let ratio = log_ratio.exp();
        let unclipped = ratio * adv;
        let clipped_term = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
        let objective = unclipped.min(clipped_term);
        let bound = if adv > 0.0 {
            (1.0 + eps) * adv
        } else {
            (1.0 - eps) * adv
        };
        s.max_bound_excess = s.max_bound_excess.max(objective - bound);
        s.clipped_objective += objective * inv_b;
        s.unclipped_objective += unclipped * inv_b;
        if (ratio - 1.0).abs() > eps {
            clipped += 1;
        }
        s.approx_kl += ((ratio - 1.0) - log_ratio) * inv_b;

        let entropy: f64 = -logp
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&lp, _)| lp.exp() * lp)
            .sum::<f64>();
        s.entropy += entropy * inv_b;

        // The min picks the clipped branch only when it is strictly smaller; its gradient is zero.
        let g_logp = if clipped_term < unclipped { 0.0 } else { -adv * ratio * inv_b };
        for k in 0..n {
            if !mask[k] {
                continue;
            }
            let p = logp[k].exp();
            let onehot = if k == a { 1.0 } else { 0.0 };
            d_logits[[i, k]] = g_logp * (onehot - p) + config.entropy_coef * p * (logp[k] + entropy) * inv_b;
        }

        let diff = values[[i, 0]] - batch.returns[i];
        s.value_loss += diff * diff * inv_b;
        d_values[[i, 0]] = 2.0 * config.value_coef * diff * inv_b;
    }

    s.policy_loss = -s.clipped_objective;
    s.clip_fraction = clipped as f64 * inv_b;
    s.total = s.policy_loss + config.value_coef * s.value_loss - config.entropy_coef * s.entropy;

    if let Some(grad) = grad {
        params.actor.backward(&actor_cache, d_logits.view(), &mut grad.actor);
        params.critic.backward(&critic_cache, d_values.view(), &mut grad.critic);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Owned {
        obs: Array2<f64>,
        masks: Vec<bool>,
        actions: Vec<usize>,
        old: Vec<f64>,
        adv: Vec<f64>,
        ret: Vec<f64>,
    }

    impl Owned {
        fn view(&self) -> Minibatch<'_> {
            Minibatch {
                observations: self.obs.view(),
                masks: &self.masks,
                actions: &self.actions,
                old_log_probs: &self.old,
                advantages: &self.adv,
                returns: &self.ret,
            }
        }
    }

    fn random_batch(params: &PolicyParams, b: usize, rng: &mut ChaCha8Rng, spread: f64) -> Owned {
        let (d, n) = (params.obs_dim(), params.n_actions());
        let obs = Array2::from_shape_fn((b, d), |_| rng.gen_range(-1.0..1.0));
        let mut masks = Vec::with_capacity(b * n);
        let mut actions = Vec::with_capacity(b);
        let mut old = Vec::with_capacity(b);
        for i in 0..b {
            let mut m: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
            let forced = rng.gen_range(0..n);
            m[forced] = true;
            let eligible: Vec<usize> = (0..n).filter(|&k| m[k]).collect();
            let a = eligible[rng.gen_range(0..eligible.len())];
            let row = params.actor.forward_one(obs.row(i));
            let lp = masked_log_softmax(row.as_slice().unwrap(), &m).unwrap();
            let jitter = if spread > 0.0 { rng.gen_range(-spread..spread) } else { 0.0 };
            old.push(lp[a] + jitter);
            actions.push(a);
            masks.extend(m);
        }
        let adv = (0..b).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let ret = (0..b).map(|_| rng.gen_range(-3.0..3.0)).collect();
        Owned {
            obs,
            masks,
            actions,
            old,
            adv,
            ret,
        }
    }

    const CFG: LossConfig = LossConfig {
        clip_epsilon: 0.2,
        value_coef: 0.5,
        entropy_coef: 0.01,
    };

    #[test]
    fn ratio_identity_at_old_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = PolicyParams::new(6, 3, &[16, 16], &mut rng);
        let batch = random_batch(&p, 32, &mut rng, 0.0);
        let s = ppo_loss(&p, &batch.view(), &CFG, None).unwrap();
        let mean_adv = batch.adv.iter().sum::<f64>() / 32.0;
        assert_eq!(s.clip_fraction, 0.0);
        assert!((s.clipped_objective - s.unclipped_objective).abs() <= 1e-15);
        assert!((s.clipped_objective - mean_adv).abs() <= 1e-12);
        assert!(s.approx_kl.abs() <= 1e-15);
    }

    #[test]
    fn objective_respects_clip_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = PolicyParams::new(5, 4, &[8, 8], &mut rng);
        let batch = random_batch(&p, 200, &mut rng, 1.5);
        let s = ppo_loss(&p, &batch.view(), &CFG, None).unwrap();
        assert!(s.clip_fraction > 0.3);
        assert!(s.max_bound_excess <= 0.0);
    }

    /// Central differences over every parameter versus the analytic gradient.
    fn gradient_rel_error(p: &PolicyParams, batch: &Owned) -> f64 {
        let mut g = p.zeros_like();
        ppo_loss(p, &batch.view(), &CFG, Some(&mut g)).unwrap();
        let analytic: Vec<f64> = g.tensors().flat_map(|t| t.iter().copied()).collect();
        let mut numeric = Vec::with_capacity(analytic.len());
        let h = 1e-6;
        let mut q = p.clone();
        let sizes: Vec<usize> = p.tensors().map(|t| t.len()).collect();
        for (ti, &len) in sizes.iter().enumerate() {
            for j in 0..len {
                let orig = q.tensors().nth(ti).unwrap()[j];
                q.tensors_mut().nth(ti).unwrap()[j] = orig + h;
                let up = ppo_loss(&q, &batch.view(), &CFG, None).unwrap().total;
                q.tensors_mut().nth(ti).unwrap()[j] = orig - h;
                let down = ppo_loss(&q, &batch.view(), &CFG, None).unwrap().total;
                q.tensors_mut().nth(ti).unwrap()[j] = orig;
                numeric.push((up - down) / (2.0 * h));
            }
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        diff / scale(&analytic).max(scale(&numeric)).max(1e-12)
    }

    #[test]
    fn full_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let p = PolicyParams::new(4, 2, &[6, 5], &mut rng);
            let batch = random_batch(&p, 8, &mut rng, 0.4);
            let rel = gradient_rel_error(&p, &batch);
            assert!(rel <= 1e-4, "trial {trial}: relative error {rel}");
        }
    }
}
