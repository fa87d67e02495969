//! Masked categorical distribution over job indices.
//!
//! Masked-out entries get probability exactly zero: their logits are treated
//! as negative infinity and never enter the normalizer.

use rand::Rng;

use super::PpoError;

fn check(logits: &[f64], mask: &[bool]) -> Result<(), PpoError> {
    if logits.len() != mask.len() {
        return Err(PpoError::ShapeMismatch {
            expected: logits.len(),
            found: mask.len(),
        });
    }
    if !mask.iter().any(|&b| b) {
        return Err(PpoError::EmptyMask);
    }
    Ok(())
}

/// Log-probabilities of the renormalized distribution; `-inf` where masked.
pub fn masked_log_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>, PpoError> {
    check(logits, mask)?;
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| (l - max).exp())
        .sum();
    let log_z = max + sum.ln();
    Ok(logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { l - log_z } else { f64::NEG_INFINITY })
        .collect())
}

/// Draws an eligible action; returns it with its log-probability.
pub fn sample_masked<R: Rng + ?Sized>(logits: &[f64], mask: &[bool], rng: &mut R) -> Result<(usize, f64), PpoError> {
    let logp = masked_log_softmax(logits, mask)?;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut chosen = None;
    for (k, &lp) in logp.iter().enumerate() {
        if !mask[k] {
            continue;
        }
        chosen = Some(k);
        acc += lp.exp();
        if u < acc {
            break;
        }
    }
    // Rounding can leave `acc` slightly below 1; the last eligible index absorbs it.
    let k = chosen.expect("mask has an eligible entry");
    Ok((k, logp[k]))
}

/// Highest eligible logit, lowest index on ties.
pub fn greedy_masked(logits: &[f64], mask: &[bool]) -> Result<usize, PpoError> {
    check(logits, mask)?;
    let mut best: Option<usize> = None;
    for (k, &l) in logits.iter().enumerate() {
        if mask[k] && best.is_none_or(|b| l > logits[b]) {
            best = Some(k);
        }
    }
    Ok(best.expect("mask has an eligible entry"))
}

/// Entropy of the renormalized distribution.
pub fn masked_entropy(logits: &[f64], mask: &[bool]) -> Result<f64, PpoError> {
    let logp = masked_log_softmax(logits, mask)?;
    Ok(-logp
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&lp, _)| lp.exp() * lp)
        .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forced_choice_has_zero_log_prob() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let (a, lp) = sample_masked(&[3.0, -2.0, 7.0], &[false, true, false], &mut rng).unwrap();
            assert_eq!(a, 1);
            assert_eq!(lp, 0.0);
        }
    }

    #[test]
    fn masking_dominates_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(sample_masked(&[5.0, 0.0], &[false, true], &mut rng).unwrap().0, 1);
        }
        assert_eq!(greedy_masked(&[5.0, 0.0], &[false, true]).unwrap(), 1);
    }

    #[test]
    fn all_false_mask_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(sample_masked(&[1.0, 2.0], &[false, false], &mut rng), Err(PpoError::EmptyMask));
        assert_eq!(greedy_masked(&[1.0], &[false]), Err(PpoError::EmptyMask));
    }

    #[test]
    fn uniform_logits_sample_uniformly() {
        // chi-square with 3 degrees of freedom; 16.27 is the 0.999 quantile.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mask = [true, false, true, true, false, true];
        let mut counts = [0u32; 6];
        let draws = 100_000;
        for _ in 0..draws {
            counts[sample_masked(&[0.0; 6], &mask, &mut rng).unwrap().0] += 1;
        }
        assert_eq!(counts[1] + counts[4], 0);
        let expected = draws as f64 / 4.0;
        let chi2: f64 = [0, 2, 3, 5]
            .iter()
            .map(|&k| (counts[k] as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 16.27, "chi2 {chi2} counts {counts:?}");
    }

    #[test]
    fn log_softmax_normalizes_over_mask() {
        let lp = masked_log_softmax(&[1.0, 100.0, 2.0], &[true, false, true]).unwrap();
        let total: f64 = lp.iter().filter(|x| x.is_finite()).map(|x| x.exp()).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert_eq!(lp[1], f64::NEG_INFINITY);
        assert!((masked_entropy(&[0.0; 4], &[true; 4]).unwrap() - 4f64.ln()).abs() < 1e-15);
    }
}
