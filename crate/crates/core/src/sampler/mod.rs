//! Budgeted sampling of a scalar oracle: uniform sweeps and gradient-weighted
//! adaptive stochastic sampling (GWASS).
//!
//! GWASS spends a small share of the budget on a uniform coarse pass, uses
//! the finite-difference slope of each coarse interval as a weight, draws how
//! many of the remaining evaluations each interval receives, and places them
//! stratified-uniformly inside it. The oracle is called exactly
//! `budget.total` times.

mod allocation;
mod gwass;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use allocation::{allocate, allocate_largest_remainder};
pub use gwass::{coarse_phase, interval_weights, run_gwass, run_gwass_seeded};

/// Something that maps an input to a measured output and may fail.
///
/// Calls are strictly sequential: on a physical bench each evaluation
/// changes shared instrument state.
pub trait Oracle<T> {
    type Error;

    fn evaluate(&mut self, x: T) -> Result<T, Self::Error>;
}

impl<T, E, F> Oracle<T> for F
where
    F: FnMut(T) -> Result<T, E>,
{
    type Error = E;

    fn evaluate(&mut self, x: T) -> Result<T, E> {
        self(x)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError<T: std::fmt::Display, E: std::fmt::Display> {
    #[error("invalid sampling setup: {0}")]
    Invalid(String),
    #[error("oracle failed at x = {x}: {cause}")]
    Oracle { x: T, cause: E },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Domain<T> {
    pub fn new(lo: T, hi: T) -> Result<Self, String> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(format!("domain needs finite lo < hi (got [{lo}, {hi}])"));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    /// `n` evenly spaced points including both endpoints. The last point is
    /// exactly `hi`.
    pub fn linspace(&self, n: usize) -> Vec<T> {
        match n {
            0 => Vec::new(),
            1 => vec![self.lo],
            _ => {
                let step = self.width() / T::lit((n - 1) as f64);
                let mut xs: Vec<T> = (0..n).map(|i| self.lo + T::lit(i as f64) * step).collect();
                xs[n - 1] = self.hi;
                xs
            }
        }
    }
}

/// Evaluation budget and the share of it spent on the coarse pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub total: usize,
    pub coarse_fraction: f64,
}

impl Budget {
    pub const DEFAULT_COARSE_FRACTION: f64 = 0.2;

    pub fn new(total: usize, coarse_fraction: f64) -> Result<Self, String> {
        let b = Self { total, coarse_fraction };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.total < 4 {
            return Err(format!("budget must be at least 4 evaluations, got {}", self.total));
        }
        if !(self.coarse_fraction > 0.0 && self.coarse_fraction < 1.0) {
            return Err(format!("coarse fraction must lie in (0, 1), got {}", self.coarse_fraction));
        }
        if self.n_coarse() > self.total - 1 {
            return Err(format!(
                "coarse pass of {} points leaves no fine budget out of {}",
                self.n_coarse(),
                self.total
            ));
        }
        Ok(())
    }

    /// `max(2, round(fraction * total))`.
    pub fn n_coarse(&self) -> usize {
        ((self.coarse_fraction * self.total as f64).round() as usize).max(2)
    }

    pub fn n_fine(&self) -> usize {
        self.total - self.n_coarse()
    }
}

/// How fine samples are distributed over the coarse intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationMode {
    /// One multinomial draw over the interval weights.
    #[default]
    Multinomial,
    /// Deterministic largest-remainder rounding of the expected counts.
    LargestRemainder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GwassConfig<T> {
    /// Weight floor as a fraction of the mean coarse slope.
    pub epsilon: T,
    pub seed: u64,
    /// Stratified placement inside an interval (one sample per equal slot);
    /// otherwise independent uniform draws.
    pub stratified: bool,
    pub allocation: AllocationMode,
}

impl<T: Scalar> Default for GwassConfig<T> {
    fn default() -> Self {
        Self { epsilon: T::lit(0.01), seed: 0, stratified: true, allocation: AllocationMode::Multinomial }
    }
}

impl<T: Scalar> GwassConfig<T> {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

/// Measured `(x, y)` pairs sorted by strictly increasing `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet<T> {
    pub points: Vec<(T, T)>,
    pub oracle_calls: usize,
}

impl<T: Scalar> SampleSet<T> {
    pub fn xs(&self) -> impl Iterator<Item = T> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sorts by `x` and drops repeated abscissae, keeping the first reading.
    fn normalize(&mut self) {
        self.points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite abscissae"));
        self.points.dedup_by(|b, a| a.0 == b.0);
    }
}

type Evaluated<T, E> = Result<Vec<(T, T)>, SamplingError<T, E>>;

/// Calls the oracle at each `x` in order.
pub(crate) fn evaluate_all<T, O>(oracle: &mut O, xs: &[T]) -> Evaluated<T, O::Error>
where
    T: Scalar,
    O: Oracle<T>,
    O::Error: std::fmt::Display,
{
    xs.iter()
        .map(|&x| oracle.evaluate(x).map(|y| (x, y)).map_err(|cause| SamplingError::Oracle { x, cause }))
        .collect()
}

/// `n` evenly spaced evaluations over the domain, endpoints included.
pub fn uniform_sweep<T, O>(oracle: &mut O, domain: Domain<T>, n: usize) -> Result<SampleSet<T>, SamplingError<T, O::Error>>
where
    T: Scalar,
    O: Oracle<T>,
    O::Error: std::fmt::Display,
{
    if n < 2 {
        return Err(SamplingError::Invalid(format!("uniform sweep needs at least 2 points, got {n}")));
    }
    let xs = domain.linspace(n);
    let points = evaluate_all(oracle, &xs)?;
    let mut set = SampleSet { points, oracle_calls: n };
    set.normalize();
    Ok(set)
}
