//! Square-law model of the two-transistor inverting amplifier.
//!
//! An N-channel driver (gate = V_in, source grounded) pulls the output node
//! down against a P-channel current-source load (source = V_DD, gate =
//! V_bias). A small conductance from the output node to ground stands in for
//! the meter's input resistance, which makes the node equation strictly
//! monotone and keeps the output defined when both devices are off.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("invalid operating point: {0}")]
    InvalidOperatingPoint(String),
    #[error("invalid circuit parameters: {0}")]
    InvalidParams(String),
    #[error("input grid must be strictly increasing (index {index})")]
    GridNotIncreasing { index: usize },
}

/// Square-law parameters of one enhancement-mode device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosfetParams<T> {
    /// Threshold voltage magnitude (V).
    pub vt: T,
    /// Transconductance coefficient (A/V²).
    pub k: T,
    /// Channel-length modulation (1/V).
    pub lambda: T,
}

impl<T: Scalar> MosfetParams<T> {
    pub fn new(vt: T, k: T, lambda: T) -> Result<Self, CircuitError> {
        let p = Self { vt, k, lambda };
        p.validate()?;
        Ok(p)
    }

    /// Default driver device, loosely modeled on a BS170.
    pub fn default_nmos() -> Self {
        Self { vt: T::lit(2.0), k: T::lit(0.02), lambda: T::lit(0.01) }
    }

    /// Default load device, loosely modeled on a BS250P.
    pub fn default_pmos() -> Self {
        Self { vt: T::lit(1.0), k: T::lit(0.02), lambda: T::lit(0.01) }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        let finite = self.vt.is_finite() && self.k.is_finite() && self.lambda.is_finite();
        if !finite || self.k <= T::zero() || self.vt < T::zero() || self.lambda < T::zero() {
            return Err(CircuitError::InvalidParams(format!(
                "need k > 0, vt >= 0, lambda >= 0 (got vt={}, k={}, lambda={})",
                self.vt, self.k, self.lambda
            )));
        }
        Ok(())
    }
}

/// Physics of the simulated bench.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams<T> {
    pub nmos: MosfetParams<T>,
    pub pmos: MosfetParams<T>,
    /// Conductance from the output node to ground (S).
    pub g_leak: T,
    /// Standard deviation of the meter's additive Gaussian noise (V).
    pub noise_sigma: T,
}

impl<T: Scalar> Default for CircuitParams<T> {
    fn default() -> Self {
        Self {
            nmos: MosfetParams::default_nmos(),
            pmos: MosfetParams::default_pmos(),
            g_leak: T::lit(1e-7),
            noise_sigma: T::lit(8.58e-7),
        }
    }
}

impl<T: Scalar> CircuitParams<T> {
    pub fn validate(&self) -> Result<(), CircuitError> {
        self.nmos.validate()?;
        self.pmos.validate()?;
        if !(self.g_leak.is_finite() && self.g_leak > T::zero()) {
            return Err(CircuitError::InvalidParams(format!("g_leak must be > 0, got {}", self.g_leak)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= T::zero()) {
            return Err(CircuitError::InvalidParams(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    /// Returns a copy with the measurement noise switched off.
    pub fn noiseless(mut self) -> Self {
        self.noise_sigma = T::zero();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint<T> {
    pub vin: T,
    pub vbias: T,
    pub vdd: T,
}

impl<T: Scalar> OperatingPoint<T> {
    pub fn new(vin: T, vbias: T, vdd: T) -> Self {
        Self { vin, vbias, vdd }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        if !(self.vin.is_finite() && self.vbias.is_finite() && self.vdd.is_finite()) {
            return Err(CircuitError::InvalidOperatingPoint(format!(
                "non-finite input (vin={}, vbias={}, vdd={})",
                self.vin, self.vbias, self.vdd
            )));
        }
        if self.vdd <= T::zero() {
            return Err(CircuitError::InvalidOperatingPoint(format!("vdd must be > 0, got {}", self.vdd)));
        }
        Ok(())
    }
}

fn square_law<T: Scalar>(vov: T, vds: T, p: &MosfetParams<T>) -> T {
    let half = T::lit(0.5);
    let clm = T::one() + p.lambda * vds;
    if vds >= vov {
        half * p.k * vov * vov * clm
    } else {
        p.k * (vov * vds - half * vds * vds) * clm
    }
}

/// Drain current of the N-channel device. `vds` must be non-negative.
pub fn nmos_current<T: Scalar>(vgs: T, vds: T, p: &MosfetParams<T>) -> T {
    let vov = vgs - p.vt;
    if vov <= T::zero() || vds <= T::zero() {
        return T::zero();
    }
    square_law(vov, vds, p)
}

/// Source current of the P-channel device, with source-referenced
/// polarities. `vsd` must be non-negative.
pub fn pmos_current<T: Scalar>(vsg: T, vsd: T, p: &MosfetParams<T>) -> T {
    let vov = vsg - p.vt;
    if vov <= T::zero() || vsd <= T::zero() {
        return T::zero();
    }
    square_law(vov, vsd, p)
}

/// Net current leaving the output node at voltage `vout`: pull-down plus
/// leakage minus pull-up. Strictly increasing in `vout`.
pub fn node_residual<T: Scalar>(vout: T, op: &OperatingPoint<T>, c: &CircuitParams<T>) -> T {
    let pull_down = nmos_current(op.vin, vout, &c.nmos);
    let pull_up = pmos_current(op.vdd - op.vbias, op.vdd - vout, &c.pmos);
    pull_down + c.g_leak * vout - pull_up
}

/// Noiseless output voltage at an operating point.
///
/// The residual is non-positive at 0 V and positive at V_DD, so bisection on
/// `[0, vdd]` always converges to the unique root.
pub fn solve_vout<T: Scalar>(op: OperatingPoint<T>, c: &CircuitParams<T>) -> Result<T, CircuitError> {
    op.validate()?;
    let tol = T::residual_tolerance();
    let f = |v: T| node_residual(v, &op, c);

    let (mut lo, mut hi) = (T::zero(), op.vdd);
    let (mut f_lo, mut f_hi) = (f(lo), f(hi));
    if f_lo >= T::zero() {
        return Ok(lo);
    }
    if f_hi <= T::zero() {
        return Ok(hi);
    }

    let two = T::lit(2.0);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid.abs() <= tol {
            return Ok(mid);
        }
        if f_mid < T::zero() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi })
}

/// Applies [`solve_vout`] along a strictly increasing input grid.
pub fn transfer_curve<T: Scalar>(
    vbias: T,
    vdd: T,
    vin_grid: &[T],
    c: &CircuitParams<T>,
) -> Result<Vec<(T, T)>, CircuitError> {
    if let Some(index) = vin_grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(CircuitError::GridNotIncreasing { index: index + 1 });
    }
    vin_grid
        .iter()
        .map(|&vin| solve_vout(OperatingPoint::new(vin, vbias, vdd), c).map(|v| (vin, v)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn defaults() -> CircuitParams<f64> {
        CircuitParams::default()
    }

    /// Independent root search: scan a dense grid for the sign change, then
    /// pick the grid point minimising |f| in the bracketing cell.
    fn brute_force_root(op: &OperatingPoint<f64>, c: &CircuitParams<f64>) -> f64 {
        let n = 20_000;
        let step = op.vdd / n as f64;
        let f = |v: f64| node_residual(v, op, c);
        if f(0.0) >= 0.0 {
            return 0.0;
        }
        let mut prev = 0.0;
        for i in 1..=n {
            let v = i as f64 * step;
            if f(v) >= 0.0 {
                // Refine linearly inside the cell with a fine sub-grid.
                let sub = 2_000;
                let mut best = (prev, f(prev).abs());
                for j in 0..=sub {
                    let x = prev + (v - prev) * j as f64 / sub as f64;
                    let r = f(x).abs();
                    if r < best.1 {
                        best = (x, r);
                    }
                }
                return best.0;
            }
            prev = v;
        }
        op.vdd
    }

    #[test]
    fn nmos_examples() {
        let p = MosfetParams { vt: 2.0, k: 0.02, lambda: 0.0 };
        assert_eq!(nmos_current(0.0, 1.0, &p), 0.0);
        assert_abs_diff_eq!(nmos_current(3.0, 3.0, &p), 0.01, epsilon = 1e-15);
        assert_eq!(nmos_current(3.0, 0.0, &MosfetParams::default_nmos()), 0.0);
    }

    #[test]
    fn pmos_examples() {
        let p = MosfetParams { vt: 1.0, k: 0.02, lambda: 0.0 };
        assert_eq!(pmos_current(0.5, 1.0, &p), 0.0);
        assert_abs_diff_eq!(pmos_current(3.0, 3.0, &p), 0.04, epsilon = 1e-15);
        assert_eq!(pmos_current(3.0, 0.0, &MosfetParams::default_pmos()), 0.0);
    }

    #[test]
    fn region_boundary_is_continuous() {
        let n = MosfetParams::<f64>::default_nmos();
        let p = MosfetParams::<f64>::default_pmos();
        for delta in [1e-3, 1e-6, 1e-9] {
            let vov = 1.3;
            let gap_n = nmos_current(n.vt + vov, vov - delta, &n) - nmos_current(n.vt + vov, vov + delta, &n);
            let gap_p = pmos_current(p.vt + vov, vov - delta, &p) - pmos_current(p.vt + vov, vov + delta, &p);
            assert!(gap_n.abs() < 0.05 * delta, "{gap_n}");
            assert!(gap_p.abs() < 0.05 * delta, "{gap_p}");
        }
    }

    #[test]
    fn output_high_when_driver_off() {
        let v = solve_vout(OperatingPoint::new(0.0, 0.0, 3.0), &defaults()).unwrap();
        assert_abs_diff_eq!(v, 3.0, epsilon = 1e-3);
        assert_abs_diff_eq!(v, brute_force_root(&OperatingPoint::new(0.0, 0.0, 3.0), &defaults()), epsilon = 1e-6);
    }

    #[test]
    fn output_low_when_driver_fully_on() {
        // With the load at full strength (vbias = 0) the driver sits in triode
        // at roughly 0.78 V; a weaker load drives it close to ground.
        let op = OperatingPoint::new(5.0, 0.0, 3.0);
        let v = solve_vout(op, &defaults()).unwrap();
        assert_abs_diff_eq!(v, brute_force_root(&op, &defaults()), epsilon = 1e-6);
        assert!(v < 0.3 * 3.0, "{v}");

        let weak_load = OperatingPoint::new(5.0, 1.5, 3.0);
        assert!(solve_vout(weak_load, &defaults()).unwrap() < 0.2);
    }

    #[test]
    fn both_devices_off_pins_output_to_ground() {
        assert_eq!(solve_vout(OperatingPoint::new(0.0, 5.0, 3.0), &defaults()).unwrap(), 0.0);
    }

    #[test]
    fn rejects_invalid_operating_points() {
        let c = defaults();
        assert!(matches!(
            solve_vout(OperatingPoint::new(0.0, 0.0, 0.0), &c),
            Err(CircuitError::InvalidOperatingPoint(_))
        ));
        assert!(solve_vout(OperatingPoint::new(f64::NAN, 0.0, 3.0), &c).is_err());
        assert!(solve_vout(OperatingPoint::new(0.0, f64::INFINITY, 3.0), &c).is_err());
    }

    #[test]
    fn transfer_curve_edge_cases() {
        let c = defaults();
        assert!(transfer_curve(0.0, 3.0, &[], &c).unwrap().is_empty());
        let single = transfer_curve(0.0, 3.0, &[0.0], &c).unwrap();
        assert_eq!(single.len(), 1);
        assert_abs_diff_eq!(single[0].1, 3.0, epsilon = 1e-3);

        let grid: Vec<f64> = (0..100).map(|i| 5.0 * i as f64 / 99.0).collect();
        let curve = transfer_curve(0.0, 3.0, &grid, &c).unwrap();
        assert_eq!(curve.len(), 100);
        assert!(curve.windows(2).all(|w| w[1].1 <= w[0].1));
        assert!(matches!(
            transfer_curve(0.0, 3.0, &[1.0, 1.0], &c),
            Err(CircuitError::GridNotIncreasing { index: 1 })
        ));
    }

    #[test]
    fn single_precision_tracks_double() {
        let c32 = CircuitParams::<f32>::default();
        let c64 = defaults();
        for vin in [0.0, 1.0, 2.2, 3.5, 5.0] {
            let a = solve_vout(OperatingPoint::new(vin as f32, 0.5, 3.0), &c32).unwrap() as f64;
            let b = solve_vout(OperatingPoint::new(vin, 0.5, 3.0), &c64).unwrap();
            assert!((a - b).abs() < 1e-3, "vin={vin}: {a} vs {b}");
        }
    }

    #[test]
    fn param_validation() {
        assert!(MosfetParams::new(1.0, 0.0, 0.0).is_err());
        assert!(MosfetParams::new(-1.0, 0.1, 0.0).is_err());
        let mut c = defaults();
        c.g_leak = 0.0;
        assert!(c.validate().is_err());
        assert!(defaults().validate().is_ok());
    }

    proptest! {
        #[test]
        fn residual_brackets_and_is_monotone(
            vin in -1.0f64..6.0, vbias in -1.0f64..6.0, vdd in 0.1f64..6.0,
            a in 0.0f64..1.0, b in 0.0f64..1.0,
        ) {
            let c = defaults();
            let op = OperatingPoint::new(vin, vbias, vdd);
            prop_assert!(node_residual(0.0, &op, &c) <= 0.0);
            prop_assert!(node_residual(vdd, &op, &c) >= 0.0);
            let (v1, v2) = if a < b { (a * vdd, b * vdd) } else { (b * vdd, a * vdd) };
            if v2 > v1 {
                prop_assert!(node_residual(v2, &op, &c) > node_residual(v1, &op, &c));
            }
        }

        #[test]
        fn solution_has_tiny_residual(vin in -1.0f64..6.0, vbias in -1.0f64..6.0, vdd in 0.1f64..6.0) {
            let c = defaults();
            let op = OperatingPoint::new(vin, vbias, vdd);
            let v = solve_vout(op, &c).unwrap();
            prop_assert!((0.0..=vdd).contains(&v));
            prop_assert!(node_residual(v, &op, &c).abs() <= 1e-12);
        }
    }
}
