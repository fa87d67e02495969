//! Order swapping: episode-wise perturbation of job routings during training.
//!
//! The number of swaps grows linearly with the training phase `T_p` (one tick
//! per finished episode). Each episode starts from the pristine base instance;
//! swaps never compound across episodes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;

/// Rates above this are known to destabilize training.
pub const TAU_WARN_LIMIT: f64 = 0.015;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OsmError {
    #[error("execution rate tau must be finite and non-negative, got {0}")]
    InvalidTau(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OsmConfig {
    /// Execution rate.
    pub tau: f64,
    pub enabled: bool,
}

impl Default for OsmConfig {
    fn default() -> Self {
        Self {
            tau: 0.00667,
            enabled: false,
        }
    }
}

impl OsmConfig {
    pub fn with_tau(tau: f64) -> Self {
        Self { tau, enabled: true }
    }

    pub fn disabled() -> Self {
        Self::default()
    }

    /// Rejects negative or non-finite rates; logs a warning above [`TAU_WARN_LIMIT`].
    pub fn validate(&self) -> Result<(), OsmError> {
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(OsmError::InvalidTau(self.tau));
        }
        if self.enabled && self.tau > TAU_WARN_LIMIT {
            log::warn!(
                "osm tau {} exceeds {}; heavy perturbation tends to collapse training",
                self.tau,
                TAU_WARN_LIMIT
            );
        }
        Ok(())
    }

    /// True when perturbation can change an instance.
    pub fn is_active(&self) -> bool {
        self.enabled && self.tau > 0.0
    }
}

/// One transposition of two operation positions within a job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Swap {
    pub job: usize,
    pub first: usize,
    pub second: usize,
}

/// `floor(T_p * n*m / 100 * tau)`, clamped to `n * (m - 1)`.
///
/// Values within rounding error of an integer are snapped before flooring so
/// that decimal rates such as 0.01 do not lose a swap to binary rounding.
pub fn swap_count(training_phase: u64, tau: f64, n_jobs: usize, n_machines: usize) -> usize {
    let cap = n_jobs * n_machines.saturating_sub(1);
    if tau <= 0.0 || !tau.is_finite() || training_phase == 0 {
        return 0;
    }
    let raw = training_phase as f64 * (n_jobs * n_machines) as f64 / 100.0 * tau;
    let nearest = raw.round();
    let snapped = if (raw - nearest).abs() <= (8.0 * f64::EPSILON * nearest).max(1e-12) {
        nearest
    } else {
        raw.floor()
    };
    if snapped >= cap as f64 {
        cap
    } else {
        snapped as usize
    }
}

/// Applies `k` random swaps to a copy of `base`. See [`perturb_with_swaps`].
pub fn perturb(base: &Instance, k: usize, seed: u64) -> Instance {
    perturb_with_swaps(base, k, seed).0
}

/// Each swap picks a uniform job and two distinct uniform positions in it and
/// exchanges the `(machine, duration)` pairs. Deterministic in `seed`.
pub fn perturb_with_swaps(base: &Instance, k: usize, seed: u64) -> (Instance, Vec<Swap>) {
    let (n, m) = (base.n_jobs(), base.n_machines());
    if k == 0 || m < 2 {
        return (base.clone(), Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = base.jobs().to_vec();
    let mut swaps = Vec::with_capacity(k);
    for _ in 0..k {
        let job = rng.gen_range(0..n);
        let first = rng.gen_range(0..m);
        let mut second = rng.gen_range(0..m - 1);
        if second >= first {
            second += 1;
        }
        jobs[job].swap(first, second);
        swaps.push(Swap { job, first, second });
    }
    let inst = Instance::new(base.name(), jobs).expect("transpositions preserve instance invariants");
    (inst, swaps)
}

/// SplitMix64 finalizer; decorrelates per-episode seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Swap seed for the episode played at `training_phase`.
pub fn episode_seed(run_seed: u64, training_phase: u64) -> u64 {
    splitmix64(splitmix64(run_seed ^ 0x6F73_6D5F_7377_6170).wrapping_add(training_phase))
}

/// Training-phase counter plus the pristine base instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsmState {
    pub training_phase: u64,
    base_instance: Instance,
}

impl OsmState {
    pub fn new(base_instance: Instance) -> Self {
        Self {
            training_phase: 0,
            base_instance,
        }
    }

    pub fn base_instance(&self) -> &Instance {
        &self.base_instance
    }

    pub fn on_episode_end(&mut self) {
        self.training_phase += 1;
    }

    pub fn swap_count(&self, config: &OsmConfig) -> usize {
        if !config.enabled {
            return 0;
        }
        swap_count(
            self.training_phase,
            config.tau,
            self.base_instance.n_jobs(),
            self.base_instance.n_machines(),
        )
    }

    /// Instance for the next episode: the base itself when no swap is due.
    pub fn next_instance(&self, config: &OsmConfig, run_seed: u64) -> Instance {
        let k = self.swap_count(config);
        perturb(&self.base_instance, k, episode_seed(run_seed, self.training_phase))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::worked;
    use crate::instance::generate_random;
    use crate::instance::Operation;
    use proptest::prelude::*;

    /// Integer oracle with tau given in millionths.
    fn swaps_oracle(tp: u64, tau_micro: u64, n: usize, m: usize) -> usize {
        let raw = tp as u128 * (n * m) as u128 * tau_micro as u128 / 100_000_000;
        (raw as usize).min(n * (m - 1))
    }

    #[test]
    fn swap_count_examples() {
        assert_eq!(swap_count(100, 0.00667, 15, 15), 1);
        assert_eq!(swap_count(0, 0.00667, 15, 15), 0);
        assert_eq!(swap_count(1000, 0.01, 15, 15), 22);
        assert_eq!(swap_count(1_000_000, 0.01, 15, 15), 15 * 14);
    }

    #[test]
    fn swap_count_matches_integer_grid() {
        let taus = [0, 1, 50, 1000, 5000, 6670, 10000, 15000];
        for &(n, m) in &[(2, 2), (3, 3), (6, 6), (15, 15), (20, 15), (30, 20)] {
            for &t in &taus {
                for tp in (0..5000).step_by(37) {
                    assert_eq!(
                        swap_count(tp, t as f64 / 1e6, n, m),
                        swaps_oracle(tp, t, n, m),
                        "tp={tp} tau_micro={t} {n}x{m}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_swaps_is_identity() {
        let base = worked();
        assert_eq!(perturb(&base, 0, 42), base);
    }

    #[test]
    fn hand_swap_of_worked_job() {
        let base = worked();
        let mut jobs = base.jobs().to_vec();
        jobs[0].swap(0, 2);
        let inst = Instance::new("w", jobs).unwrap();
        assert_eq!(
            inst.job(0),
            &[Operation::new(1, 14), Operation::new(0, 27), Operation::new(2, 10)]
        );
    }

    #[test]
    fn reported_swaps_replay_to_output() {
        let base = generate_random(5, 4, 1..=20, 3).unwrap();
        let (out, swaps) = perturb_with_swaps(&base, 7, 11);
        assert_eq!(swaps.len(), 7);
        let mut jobs = base.jobs().to_vec();
        for s in &swaps {
            assert_ne!(s.first, s.second);
            jobs[s.job].swap(s.first, s.second);
        }
        assert_eq!(out.jobs(), &jobs[..]);
    }

    #[test]
    fn phase_counts_episodes_only() {
        let mut st = OsmState::new(worked());
        st.on_episode_end();
        assert_eq!(st.training_phase, 1);
        for _ in 1..500 {
            st.on_episode_end();
        }
        assert_eq!(st.training_phase, 500);
    }

    #[test]
    fn disabled_or_zero_tau_yields_base() {
        let mut st = OsmState::new(generate_random(4, 4, 1..=9, 0).unwrap());
        st.training_phase = 10_000;
        let base = st.base_instance().clone();
        assert_eq!(st.next_instance(&OsmConfig::disabled(), 1), base);
        assert_eq!(st.next_instance(&OsmConfig::with_tau(0.0), 1), base);
        assert_ne!(st.next_instance(&OsmConfig::with_tau(0.01), 1), base);
    }

    #[test]
    fn tau_validation() {
        assert!(OsmConfig::with_tau(-0.1).validate().is_err());
        assert!(OsmConfig::with_tau(f64::NAN).validate().is_err());
        assert!(OsmConfig::with_tau(0.02).validate().is_ok());
    }

    proptest! {
        #[test]
        fn perturb_preserves_job_contents(
            n in 1usize..6, m in 1usize..6, inst_seed: u64, k in 0usize..40, seed: u64
        ) {
            let base = generate_random(n, m, 1..=30, inst_seed).unwrap();
            let out = perturb(&base, k, seed);
            prop_assert_eq!(out.n_jobs(), n);
            prop_assert_eq!(out.n_machines(), m);
            for j in 0..n {
                let mut a = base.job(j).to_vec();
                let mut b = out.job(j).to_vec();
                a.sort_by_key(|o| (o.machine, o.duration));
                b.sort_by_key(|o| (o.machine, o.duration));
                prop_assert_eq!(a, b);
            }
            prop_assert_eq!(perturb(&base, k, seed), out);
        }

        #[test]
        fn swap_count_monotone(tp in 0u64..100_000, tau in 0.0f64..0.05, n in 1usize..30, m in 1usize..30) {
            prop_assert!(swap_count(tp, tau, n, m) <= swap_count(tp + 1, tau, n, m));
        }
    }
}
