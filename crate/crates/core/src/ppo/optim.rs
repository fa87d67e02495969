//! Adam, global gradient-norm clipping and the learning-rate schedule.

use serde::{Deserialize, Serialize};

use super::config::TrainerConfig;
use super::net::PolicyParams;
use crate::instance::Instance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: PolicyParams,
    v: PolicyParams,
}

impl Adam {
    pub fn new(params: &PolicyParams, eps: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps,
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    /// One bias-corrected Adam step of size `lr` along `-grad`.
    pub fn step(&mut self, params: &mut PolicyParams, grad: &PolicyParams, lr: f64) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let tensors = params
            .tensors_mut()
            .zip(grad.tensors())
            .zip(self.m.tensors_mut().zip(self.v.tensors_mut()));
        for ((p, g), (m, v)) in tensors {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Rescales `grad` so its global norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_grad_norm(grad: &mut PolicyParams, max_norm: f64) -> f64 {
    let norm = grad.norm();
    if norm > max_norm && norm.is_finite() {
        grad.scale(max_norm / (norm + 1e-6));
    }
    norm
}

/// Linear decay from `lr_start` at step 0 to `lr_end` at `total_steps`.
pub fn lr_at(step: u64, config: &TrainerConfig) -> f64 {
    let total = config.total_steps.max(1);
    let frac = step.min(total) as f64 / total as f64;
    config.lr_start + (config.lr_end - config.lr_start) * frac
}

/// Largest multiple of 64 not above `2 * n * m`, at least 64.
pub fn default_n_steps(instance: &Instance) -> usize {
    let raw = 2 * instance.n_operations();
    (raw / 64 * 64).max(64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate_random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn n_steps_rule() {
        let size = |n, m| default_n_steps(&generate_random(n, m, 1..=9, 0).unwrap());
        assert_eq!(size(15, 15), 448);
        assert_eq!(size(6, 6), 64);
        assert_eq!(size(30, 20), 1152);
        assert_eq!(size(2, 2), 64);
    }

    #[test]
    fn linear_schedule_endpoints() {
        let cfg = TrainerConfig {
            total_steps: 1000,
            ..TrainerConfig::default()
        };
        assert_eq!(lr_at(0, &cfg), 1e-4);
        assert!((lr_at(1000, &cfg) - 1e-8).abs() < 1e-20);
        assert!((lr_at(500, &cfg) - 5.0005e-5).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for s in (0..=1000).step_by(10) {
            let lr = lr_at(s, &cfg);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn zero_lr_leaves_params_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = PolicyParams::new(5, 3, &[8, 8], &mut rng);
        let before = p.clone();
        let mut g = PolicyParams::new(5, 3, &[8, 8], &mut rng);
        g.scale(3.0);
        let mut adam = Adam::new(&p, 1e-5);
        for _ in 0..5 {
            adam.step(&mut p, &g, 0.0);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut g = PolicyParams::new(5, 3, &[8, 8], &mut rng);
        g.scale(100.0);
        let pre = clip_grad_norm(&mut g, 0.5);
        assert!(pre > 0.5);
        assert!(g.norm() <= 0.5);
        let mut small = g.zeros_like();
        assert_eq!(clip_grad_norm(&mut small, 0.5), 0.0);
    }
}
