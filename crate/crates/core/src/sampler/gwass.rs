use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{allocate, allocate_largest_remainder, evaluate_all, uniform_sweep};
use super::{AllocationMode, Budget, Domain, GwassConfig, Oracle, SampleSet, SamplingError};
use crate::scalar::Scalar;

/// Uniform pass with `n_coarse` points, defining `n_coarse - 1` intervals.
pub fn coarse_phase<T, O>(oracle: &mut O, domain: Domain<T>, n_coarse: usize) -> Result<SampleSet<T>, SamplingError<T, O::Error>>
where
    T: Scalar,
    O: Oracle<T>,
    O::Error: std::fmt::Display,
{
    uniform_sweep(oracle, domain, n_coarse)
}

/// Sampling probability of each coarse interval.
///
/// The weight is the absolute finite-difference slope, floored at
/// `epsilon * mean slope` so no interval is starved. A curve with no slope
/// anywhere gets equal weights.
pub fn interval_weights<T: Scalar>(coarse: &SampleSet<T>, epsilon: T) -> Vec<T> {
    let slopes: Vec<T> = coarse
        .points
        .windows(2)
        .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
        .collect();
    let n = slopes.len();
    if n == 0 {
        return Vec::new();
    }
    let n_t = T::lit(n as f64);
    let mean = slopes.iter().fold(T::zero(), |a, &g| a + g) / n_t;
    if !(mean > T::zero()) || !mean.is_finite() {
        return vec![T::one() / n_t; n];
    }
    let floor = epsilon * mean;
    let weights: Vec<T> = slopes.iter().map(|&g| g.max(floor)).collect();
    let total = weights.iter().fold(T::zero(), |a, &w| a + w);
    weights.into_iter().map(|w| w / total).collect()
}

/// Two-phase GWASS run. The oracle is called exactly `budget.total` times:
/// first over the coarse grid, then interval by interval over the fine
/// samples, each pass in increasing `x`.
pub fn run_gwass<T, O, R>(
    oracle: &mut O,
    domain: Domain<T>,
    budget: Budget,
    config: &GwassConfig<T>,
    rng: &mut R,
) -> Result<SampleSet<T>, SamplingError<T, O::Error>>
where
    T: Scalar,
    O: Oracle<T>,
    O::Error: std::fmt::Display,
    R: Rng + ?Sized,
{
    budget.validate().map_err(SamplingError::Invalid)?;
    if !(config.epsilon > T::zero()) {
        return Err(SamplingError::Invalid(format!("epsilon must be > 0, got {}", config.epsilon)));
    }

    let coarse = coarse_phase(oracle, domain, budget.n_coarse())?;
    let p = interval_weights(&coarse, config.epsilon);
    let counts = match config.allocation {
        AllocationMode::Multinomial => allocate(&p, budget.n_fine(), rng),
        AllocationMode::LargestRemainder => allocate_largest_remainder(&p, budget.n_fine()),
    };

    let mut fine_xs = Vec::with_capacity(budget.n_fine());
    for (cell, &count) in coarse.points.windows(2).zip(&counts) {
        if count == 0 {
            continue;
        }
        let (x_lo, width) = (cell[0].0, cell[1].0 - cell[0].0);
        let c = T::lit(count as f64);
        let start = fine_xs.len();
        for slot in 0..count {
            let u = T::lit(rng.sample::<f64, _>(Open01));
            let offset = if config.stratified { (T::lit(slot as f64) + u) / c } else { u };
            fine_xs.push(x_lo + offset * width);
        }
        fine_xs[start..].sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    }

    let mut points = coarse.points;
    points.extend(evaluate_all(oracle, &fine_xs)?);
    let mut set = SampleSet { points, oracle_calls: budget.total };
    set.normalize();
    Ok(set)
}

/// [`run_gwass`] with a ChaCha8 generator seeded from `config.seed`.
pub fn run_gwass_seeded<T, O>(
    oracle: &mut O,
    domain: Domain<T>,
    budget: Budget,
    config: &GwassConfig<T>,
) -> Result<SampleSet<T>, SamplingError<T, O::Error>>
where
    T: Scalar,
    O: Oracle<T>,
    O::Error: std::fmt::Display,
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    run_gwass(oracle, domain, budget, config, &mut rng)
}
