//! Comparison of a sampled run against the dense reference sweep.

use serde::Serialize;
use thiserror::Error;

use crate::record::{Curve, RunRecord};
use crate::scalar::Scalar;

/// Fraction of the steepest slope above which a reference interval counts
/// as part of the transition region.
pub const TRANSITION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("vbias values differ between run and reference (run only: {run_only:?}, reference only: {ref_only:?})")]
    VbiasMismatch { run_only: Vec<f64>, ref_only: Vec<f64> },
    #[error("curve at vbias = {vbias} has fewer than 2 points")]
    TooFewPoints { vbias: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveMetrics<T> {
    pub vbias: T,
    pub rmse: T,
    pub max_abs_err: T,
    pub density_ratio: T,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateMetrics<T> {
    pub mean_rmse: T,
    pub max_rmse: T,
    pub max_abs_err: T,
    pub mean_density_ratio: T,
    pub total_samples: usize,
    /// Reference curve with the largest slope anywhere.
    pub steepest_vbias: T,
    pub steepest_rmse: T,
    pub steepest_density_ratio: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport<T> {
    pub per_vbias: Vec<CurveMetrics<T>>,
    pub aggregate: AggregateMetrics<T>,
}

impl<T: Scalar + Serialize> MetricsReport<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Piecewise-linear interpolation through `points` (sorted by x), held
/// constant beyond either end.
pub fn interpolate<T: Scalar>(points: &[(T, T)], x: T) -> T {
    let (first, last) = (points[0], points[points.len() - 1]);
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= x);
    let (a, b) = (points[i - 1], points[i]);
    a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
}

/// RMSE and worst absolute deviation of the interpolated run against every
/// reference point.
pub fn curve_error<T: Scalar>(run: &[(T, T)], reference: &[(T, T)]) -> (T, T) {
    let mut sum_sq = T::zero();
    let mut max_abs = T::zero();
    for &(x, y_ref) in reference {
        let d = (interpolate(run, x) - y_ref).abs();
        sum_sq = sum_sq + d * d;
        max_abs = max_abs.max(d);
    }
    ((sum_sq / T::lit(reference.len() as f64)).sqrt(), max_abs)
}

fn slopes<T: Scalar>(reference: &[(T, T)]) -> Vec<T> {
    reference.windows(2).map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs()).collect()
}

/// Largest absolute slope of a curve.
pub fn max_slope<T: Scalar>(reference: &[(T, T)]) -> T {
    slopes(reference).into_iter().fold(T::zero(), T::max)
}

/// Sample concentration inside the transition region relative to the
/// region's share of the domain. Uniform sampling scores about 1; a curve
/// with no slope scores exactly 1.
pub fn curve_density_ratio<T: Scalar>(run_xs: &[T], reference: &[(T, T)]) -> T {
    let g = slopes(reference);
    let g_max = g.iter().copied().fold(T::zero(), T::max);
    if !(g_max > T::zero()) || run_xs.is_empty() {
        return T::one();
    }
    let threshold = T::lit(TRANSITION_THRESHOLD) * g_max;
    let in_region: Vec<bool> = g.iter().map(|&gi| gi >= threshold).collect();
    let width: T = reference
        .windows(2)
        .zip(&in_region)
        .filter(|(_, &r)| r)
        .fold(T::zero(), |acc, (w, _)| acc + (w[1].0 - w[0].0));
    let domain = reference[reference.len() - 1].0 - reference[0].0;

    let xs: Vec<T> = reference.iter().map(|p| p.0).collect();
    let inside = run_xs
        .iter()
        .filter(|&&x| {
            if x < xs[0] || x > xs[xs.len() - 1] {
                return false;
            }
            // Interval i spans [xs[i], xs[i+1]]; a point on a grid node
            // touches the intervals on both sides.
            let i = xs.partition_point(|&r| r <= x);
            let right = i.checked_sub(1).filter(|&k| k < in_region.len());
            let left = i.checked_sub(2).filter(|_| xs[i - 1] == x);
            right.is_some_and(|k| in_region[k]) || left.is_some_and(|k| in_region[k])
        })
        .count();

    let sample_frac = T::lit(inside as f64 / run_xs.len() as f64);
    sample_frac / (width / domain)
}

fn match_curves<T: Scalar>(run: &[Curve<T>], reference: &[Curve<T>]) -> Result<(), MetricsError> {
    let close = |a: T, b: T| (a - b).abs() <= T::lit(1e-9) * T::one().max(a.abs());
    let run_only: Vec<f64> = run
        .iter()
        .filter(|c| !reference.iter().any(|r| close(r.vbias, c.vbias)))
        .map(|c| c.vbias.to_f64_lossy())
        .collect();
    let ref_only: Vec<f64> = reference
        .iter()
        .filter(|r| !run.iter().any(|c| close(r.vbias, c.vbias)))
        .map(|r| r.vbias.to_f64_lossy())
        .collect();
    if !run_only.is_empty() || !ref_only.is_empty() || run.len() != reference.len() {
        return Err(MetricsError::VbiasMismatch { run_only, ref_only });
    }
    for c in run.iter().chain(reference) {
        if c.points.len() < 2 {
            return Err(MetricsError::TooFewPoints { vbias: c.vbias.to_f64_lossy() });
        }
    }
    Ok(())
}

/// Per-curve `(vbias, rmse, max_abs_err)` of a run against the reference.
pub fn reconstruction_error<T: Scalar>(run: &RunRecord<T>, reference: &RunRecord<T>) -> Result<Vec<(T, T, T)>, MetricsError> {
    let (run_c, ref_c) = (run.curves(), reference.curves());
    match_curves(&run_c, &ref_c)?;
    Ok(run_c
        .iter()
        .zip(&ref_c)
        .map(|(r, f)| {
            let (rmse, max_abs) = curve_error(&r.points, &f.points);
            (r.vbias, rmse, max_abs)
        })
        .collect())
}

/// Per-curve `(vbias, density_ratio)` of a run against the reference.
pub fn density_ratio<T: Scalar>(run: &RunRecord<T>, reference: &RunRecord<T>) -> Result<Vec<(T, T)>, MetricsError> {
    let (run_c, ref_c) = (run.curves(), reference.curves());
    match_curves(&run_c, &ref_c)?;
    Ok(run_c
        .iter()
        .zip(&ref_c)
        .map(|(r, f)| {
            let xs: Vec<T> = r.points.iter().map(|p| p.0).collect();
            (r.vbias, curve_density_ratio(&xs, &f.points))
        })
        .collect())
}

pub fn compare<T: Scalar>(run: &RunRecord<T>, reference: &RunRecord<T>) -> Result<MetricsReport<T>, MetricsError> {
    let (run_c, ref_c) = (run.curves(), reference.curves());
    match_curves(&run_c, &ref_c)?;
    let per_vbias: Vec<CurveMetrics<T>> = run_c
        .iter()
        .zip(&ref_c)
        .map(|(r, f)| {
            let (rmse, max_abs_err) = curve_error(&r.points, &f.points);
            let xs: Vec<T> = r.points.iter().map(|p| p.0).collect();
            CurveMetrics {
                vbias: r.vbias,
                rmse,
                max_abs_err,
                density_ratio: curve_density_ratio(&xs, &f.points),
                n_samples: r.points.len(),
            }
        })
        .collect();

    let n = T::lit(per_vbias.len() as f64);
    let steepest = ref_c
        .iter()
        .enumerate()
        .map(|(i, c)| (i, max_slope(&c.points)))
        .fold((0, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0;
    let aggregate = AggregateMetrics {
        mean_rmse: per_vbias.iter().fold(T::zero(), |a, m| a + m.rmse) / n,
        max_rmse: per_vbias.iter().fold(T::zero(), |a, m| a.max(m.rmse)),
        max_abs_err: per_vbias.iter().fold(T::zero(), |a, m| a.max(m.max_abs_err)),
        mean_density_ratio: per_vbias.iter().fold(T::zero(), |a, m| a + m.density_ratio) / n,
        total_samples: per_vbias.iter().map(|m| m.n_samples).sum(),
        steepest_vbias: per_vbias[steepest].vbias,
        steepest_rmse: per_vbias[steepest].rmse,
        steepest_density_ratio: per_vbias[steepest].density_ratio,
    };
    Ok(MetricsReport { per_vbias, aggregate })
}
