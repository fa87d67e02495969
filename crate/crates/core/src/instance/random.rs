use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Instance, InstanceError, Operation, Time};

/// Random instance: independent uniform machine permutation per job, durations
/// uniform in `durations`. Deterministic for a fixed seed.
pub fn generate_random(
    n_jobs: usize,
    n_machines: usize,
    durations: RangeInclusive<Time>,
    seed: u64,
) -> Result<Instance, InstanceError> {
    let (low, high) = (*durations.start(), *durations.end());
    if low == 0 || low > high {
        return Err(InstanceError::InvalidDurationRange { low, high });
    }
    if n_jobs == 0 || n_machines == 0 {
        return Err(InstanceError::EmptyDimensions { n_jobs, n_machines });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jobs = (0..n_jobs)
        .map(|_| {
            let mut order: Vec<usize> = (0..n_machines).collect();
            order.shuffle(&mut rng);
            order
                .into_iter()
                .map(|machine| Operation::new(machine, rng.gen_range(low..=high)))
                .collect()
        })
        .collect();
    Instance::new(format!("rand-{n_jobs}x{n_machines}-s{seed}"), jobs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::lower_bound;

    #[test]
    fn deterministic() {
        assert_eq!(
            generate_random(2, 2, 1..=5, 7).unwrap(),
            generate_random(2, 2, 1..=5, 7).unwrap()
        );
        assert_ne!(
            generate_random(4, 4, 1..=50, 7).unwrap(),
            generate_random(4, 4, 1..=50, 8).unwrap()
        );
    }

    #[test]
    fn forced_sums() {
        let inst = generate_random(1, 4, 2..=2, 0).unwrap();
        assert!(inst.job(0).iter().all(|op| op.duration == 2));
        assert_eq!(inst.job_load(0), 8);
        assert_eq!(lower_bound(&inst), 8);
    }

    #[test]
    fn valid_for_many_seeds() {
        for seed in 0..1000 {
            let inst = generate_random(3, 3, 1..=9, seed).unwrap();
            assert_eq!(Instance::new("", inst.jobs().to_vec()).unwrap(), inst.with_name(""));
        }
    }

    #[test]
    fn empty_range() {
        #[allow(clippy::reversed_empty_ranges)]
        let r = 5..=4;
        assert!(matches!(
            generate_random(2, 2, r, 0),
            Err(InstanceError::InvalidDurationRange { .. })
        ));
        assert!(generate_random(2, 2, 0..=4, 0).is_err());
    }
}
