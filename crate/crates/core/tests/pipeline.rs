use std::convert::Infallible;

use labbench_core::circuit::{solve_vout, transfer_curve};
use labbench_core::metrics::compare;
use labbench_core::sampler::{run_gwass_seeded, uniform_sweep};
use labbench_core::scpi::format_nr3;
use labbench_core::{
    Bench, BenchConfig, Budget, CircuitParams, CircuitParamsF32, Domain, DomainF32, GwassConfig, GwassConfigF32,
    OperatingPoint, OperatingPointF32, RunRecord,
};

fn curve_oracle(vbias: f64, c: CircuitParams) -> impl FnMut(f64) -> Result<f64, Infallible> {
    move |vin| Ok(solve_vout(OperatingPoint::new(vin, vbias, 3.0), &c).unwrap())
}

#[test]
fn gwass_beats_uniform_on_the_steep_curve() {
    let c = CircuitParams::default();
    let domain = Domain::new(0.0, 5.0).unwrap();
    let fine: Vec<f64> = domain.linspace(10_000);

    let mut reference = RunRecord::new();
    let mut uniform = RunRecord::new();
    let mut gwass = RunRecord::new();
    let vbias = 5.0 / 3.0;
    reference.push_curve(vbias, &transfer_curve(vbias, 3.0, &fine, &c).unwrap());
    uniform.push_curve(vbias, &uniform_sweep(&mut curve_oracle(vbias, c), domain, 100).unwrap().points);
    let budget = Budget::new(100, Budget::DEFAULT_COARSE_FRACTION).unwrap();
    let set = run_gwass_seeded(&mut curve_oracle(vbias, c), domain, budget, &GwassConfig::with_seed(42)).unwrap();
    assert_eq!(set.oracle_calls, 100);
    gwass.push_curve(vbias, &set.points);

    let u = compare(&uniform, &reference).unwrap().aggregate;
    let g = compare(&gwass, &reference).unwrap().aggregate;
    assert!(g.steepest_rmse < u.steepest_rmse, "{} vs {}", g.steepest_rmse, u.steepest_rmse);
    assert!(g.steepest_density_ratio > 1.0);
}

#[test]
fn f32_pipeline_tracks_f64() {
    let c64 = CircuitParams::default();
    let c32 = CircuitParamsF32::default();
    let domain = DomainF32::new(0.0, 5.0).unwrap();
    let mut oracle = |vin: f32| solve_vout(OperatingPointF32::new(vin, 1.0, 3.0), &c32);
    let budget = Budget::new(50, Budget::DEFAULT_COARSE_FRACTION).unwrap();
    let set = run_gwass_seeded(&mut oracle, domain, budget, &GwassConfigF32::with_seed(1)).unwrap();
    assert_eq!(set.points.len(), 50);
    for &(x, y) in &set.points {
        let exact = solve_vout(OperatingPoint::new(x as f64, 1.0, 3.0), &c64).unwrap();
        assert!((y as f64 - exact).abs() < 1e-3, "vin {x}: {y} vs {exact}");
    }
}

#[test]
fn record_survives_a_file_round_trip() {
    let c = CircuitParams::default();
    let grid = Domain::new(0.0, 5.0).unwrap().linspace(20);
    let mut rec = RunRecord::new();
    for vbias in [0.0, 2.5] {
        rec.push_curve(vbias, &transfer_curve(vbias, 3.0, &grid, &c).unwrap());
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    rec.save(&path).unwrap();
    let back = RunRecord::load(&path).unwrap();
    assert_eq!(back.to_csv_string(), rec.to_csv_string());
    assert_eq!(back.curves().len(), 2);
}

#[test]
fn bench_measures_the_circuit_through_scpi() {
    let mut cfg = BenchConfig::default();
    cfg.circuit = cfg.circuit.noiseless();
    let mut bench = Bench::new(&cfg).unwrap();
    for (ch, v) in [(1, 2.0), (2, 3.0), (3, 1.0)] {
        assert_eq!(bench.execute("PSU-001", &format!("INST:NSEL {ch};:VOLT {v};:CURR 0.1;:OUTP ON")), Some(vec![]));
    }
    let reply = bench.execute("DMM-001", "READ?").unwrap();
    let expected = solve_vout(OperatingPoint::new(2.0, 1.0, 3.0), &cfg.circuit).unwrap();
    assert_eq!(reply, [format_nr3(expected)]);
    assert_eq!(bench.execute("PSU-001", "SYST:ERR?").unwrap(), ["0,\"No error\""]);
}
