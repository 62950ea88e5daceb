//! Reference oracles and small statistics helpers for the acceptance suite.
//!
//! The circuit oracle is written out from the square-law device equations
//! rather than calling into the solver under test, and it finds the node
//! voltage by brute-force grid search instead of bisection.

use labbench_core::CircuitParams;

#[derive(Debug, Clone, Copy)]
pub struct Device {
    pub vt: f64,
    pub k: f64,
    pub lambda: f64,
}

/// Drain current for a gate drive `vg` and channel voltage `vd`, both taken
/// relative to the source (so it serves either polarity).
pub fn square_law(vg: f64, vd: f64, d: Device) -> f64 {
    let vov = vg - d.vt;
    if vov <= 0.0 || vd <= 0.0 {
        return 0.0;
    }
    let clm = 1.0 + d.lambda * vd;
    if vd >= vov {
        0.5 * d.k * vov * vov * clm
    } else {
        d.k * (vov * vd - 0.5 * vd * vd) * clm
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Model {
    pub nmos: Device,
    pub pmos: Device,
    pub g_leak: f64,
}

impl Model {
    pub fn from_params(c: &CircuitParams) -> Self {
        let dev = |p: &labbench_core::MosfetParams| Device { vt: p.vt, k: p.k, lambda: p.lambda };
        Self { nmos: dev(&c.nmos), pmos: dev(&c.pmos), g_leak: c.g_leak }
    }

    /// Net current leaving the output node at voltage `v`.
    pub fn residual(&self, vin: f64, vbias: f64, vdd: f64, v: f64) -> f64 {
        square_law(vin, v, self.nmos) + self.g_leak * v - square_law(vdd - vbias, vdd - v, self.pmos)
    }

    /// Output voltage by grid minimisation of |residual| over [0, vdd]:
    /// evaluate a 1001-point grid, zoom into the neighbours of the best
    /// point, and repeat until the window is narrower than `resolution`.
    pub fn brute_force_vout(&self, vin: f64, vbias: f64, vdd: f64, resolution: f64) -> f64 {
        const N: usize = 1001;
        let (mut lo, mut hi) = (0.0, vdd);
        loop {
            let step = (hi - lo) / (N - 1) as f64;
            let best = (0..N)
                .map(|i| (i, self.residual(vin, vbias, vdd, lo + step * i as f64).abs()))
                .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
                .0;
            let x = lo + step * best as f64;
            if hi - lo <= resolution || step == 0.0 {
                return x;
            }
            let (nlo, nhi) = ((x - step).max(lo), (x + step).min(hi));
            if nlo == lo && nhi == hi {
                return x;
            }
            (lo, hi) = (nlo, nhi);
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample mean and (n − 1) standard deviation, accumulated with Welford's
/// update so 10⁵ values near 3 V keep their sub-µV spread.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for &x in values {
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    (mean, (m2 / (n - 1.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let n = Device { vt: 2.0, k: 0.02, lambda: 0.0 };
        let p = Device { vt: 1.0, k: 0.02, lambda: 0.0 };
        assert!((square_law(3.0, 3.0, n) - 0.01).abs() < 1e-15);
        assert!((square_law(3.0, 3.0, p) - 0.04).abs() < 1e-15);
        assert_eq!(square_law(0.0, 1.0, n), 0.0);
        assert_eq!(square_law(3.0, 0.0, n), 0.0);
    }

    #[test]
    fn brute_force_finds_linear_root() {
        // Only the leak and a saturated load: g·v = ½k(vov)²  (λ = 0).
        let m = Model {
            nmos: Device { vt: 10.0, k: 0.02, lambda: 0.0 },
            pmos: Device { vt: 1.0, k: 2e-7, lambda: 0.0 },
            g_leak: 1e-7,
        };
        // vsg = 3 → 0.5·2e-7·4 = 4e-7 A → v = 4 V; above vdd = 3 so the load is in triode.
        let v = m.brute_force_vout(0.0, 0.0, 3.0, 1e-12);
        assert!(m.residual(0.0, 0.0, 3.0, v).abs() < 1e-18, "{v}");
    }

    #[test]
    fn statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - 1.2909944487358056).abs() < 1e-15);
    }
}
