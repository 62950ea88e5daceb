use rand::Rng;

use crate::scalar::Scalar;

/// Multinomial draw of `n_fine` trials over the probability vector `p`.
///
/// Each trial inverts the cumulative distribution with one uniform variate,
/// so the result depends only on the generator state. Intervals with zero
/// probability never receive a sample.
pub fn allocate<T: Scalar, R: Rng + ?Sized>(p: &[T], n_fine: usize, rng: &mut R) -> Vec<usize> {
    let mut counts = vec![0usize; p.len()];
    let Some(last_positive) = p.iter().rposition(|&pi| pi > T::zero()) else {
        return counts;
    };
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0f64;
    for &pi in p {
        acc += pi.to_f64_lossy().max(0.0);
        cdf.push(acc);
    }
    let total = acc;
    for _ in 0..n_fine {
        let u = rng.random::<f64>() * total;
        let idx = cdf.partition_point(|&c| c <= u).min(last_positive);
        counts[idx] += 1;
    }
    counts
}

/// Deterministic counterpart of [`allocate`]: floors the expected counts and
/// hands the remainder to the largest fractional parts (lower index wins
/// ties).
pub fn allocate_largest_remainder<T: Scalar>(p: &[T], n_fine: usize) -> Vec<usize> {
    let total: f64 = p.iter().map(|pi| pi.to_f64_lossy().max(0.0)).sum();
    if p.is_empty() || total <= 0.0 {
        return vec![0; p.len()];
    }
    let quotas: Vec<f64> = p.iter().map(|pi| pi.to_f64_lossy().max(0.0) / total * n_fine as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(n_fine.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_interval_takes_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(allocate(&[1.0], 80, &mut rng), [80]);
        assert_eq!(allocate_largest_remainder(&[1.0], 80), [80]);
    }

    #[test]
    fn degenerate_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(allocate(&[1.0, 0.0, 0.0, 0.0], 50, &mut rng), [50, 0, 0, 0]);
        assert_eq!(allocate(&[0.0, 0.0, 1.0, 0.0], 50, &mut rng), [0, 0, 50, 0]);
    }

    #[test]
    fn zero_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(allocate(&[0.5, 0.5], 0, &mut rng), [0, 0]);
    }

    #[test]
    fn deterministic_for_seed() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let a = allocate(&p, 100, &mut ChaCha8Rng::seed_from_u64(9));
        let b = allocate(&p, 100, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_eq!(a.iter().sum::<usize>(), 100);
    }

    #[test]
    fn monte_carlo_mean_matches_expectation() {
        let p = [0.25f64; 4];
        let mut sums = [0usize; 4];
        for seed in 0..1000 {
            let c = allocate(&p, 80, &mut ChaCha8Rng::seed_from_u64(seed));
            assert_eq!(c.iter().sum::<usize>(), 80);
            for (s, c) in sums.iter_mut().zip(c) {
                *s += c;
            }
        }
        for s in sums {
            let mean = s as f64 / 1000.0;
            assert!((mean - 20.0).abs() <= 1.0, "{mean}");
        }
    }

    #[test]
    fn largest_remainder_rounding() {
        assert_eq!(allocate_largest_remainder(&[1.0 / 3.0; 3], 10), [4, 3, 3]);
        assert_eq!(allocate_largest_remainder(&[0.5, 0.3, 0.2], 7), [4, 2, 1]);
        assert_eq!(allocate_largest_remainder(&[0.0, 0.0], 5), [0, 0]);
    }
}
