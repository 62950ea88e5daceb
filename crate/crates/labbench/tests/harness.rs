use std::process::Command;

use labbench::harness::metrics_from_files;
use labbench::server::{spawn_local, ServerOptions};
use labbench::{run_reference, run_sweep, ExperimentConfig, Mode, RemoteBench};
use labbench_core::{BenchConfig, CircuitParams, RunRecord};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_labbench"))
}

#[test]
fn remote_uniform_sweep_shape() {
    let server = spawn_local(&BenchConfig::default(), ServerOptions::default()).unwrap();
    let mut drv = RemoteBench::connect("127.0.0.1", server.port(), "EDU36311A", "EDU34450A").unwrap();
    let rec = run_sweep(&mut drv, &ExperimentConfig::default()).unwrap();
    assert_eq!(rec.len(), 1000);
    let curves = rec.curves();
    assert_eq!(curves.len(), 10);
    for c in &curves {
        assert_eq!(c.points.len(), 100);
        let step = 5.0 / 99.0;
        for (i, p) in c.points.iter().enumerate() {
            assert!((p.0 - i as f64 * step).abs() < 1e-12);
        }
    }
    // Outputs are off once the sweep is over.
    assert_eq!(drv.psu.query("INST:NSEL 2;:OUTP?").unwrap(), "0");
}

#[test]
fn gwass_sweep_is_reproducible_against_one_server() {
    let server = spawn_local(&BenchConfig::default(), ServerOptions::default()).unwrap();
    let cfg = ExperimentConfig { mode: Mode::Gwass, seed: 7, ..Default::default() };
    let mut runs = Vec::new();
    for _ in 0..2 {
        let mut drv = RemoteBench::connect("127.0.0.1", server.port(), "PSU-001", "DMM-001").unwrap();
        runs.push(run_sweep(&mut drv, &cfg).unwrap().to_csv_string());
    }
    assert_eq!(runs[0], runs[1]);
    let rec = RunRecord::read_csv(runs[0].as_bytes()).unwrap();
    assert!(rec.curves().iter().all(|c| c.points.len() == 100));
}

#[test]
fn reference_and_metrics_cli() {
    let dir = tempfile::tempdir().unwrap();
    let reference = dir.path().join("ref.csv");
    let run = dir.path().join("run.csv");
    let report = dir.path().join("report.json");

    let st = bin().args(["reference", "--points", "2000", "--out"]).arg(&reference).status().unwrap();
    assert!(st.success());
    assert_eq!(RunRecord::load(&reference).unwrap().len(), 20_000);

    let st = bin().args(["sweep", "--direct", "--mode", "gwass", "--seed", "3", "--out"]).arg(&run).status().unwrap();
    assert!(st.success());

    let st = bin().args(["metrics", "--run"]).arg(&run).arg("--ref").arg(&reference).arg("--out").arg(&report).status().unwrap();
    assert!(st.success());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["per_vbias"].as_array().unwrap().len(), 10);
    assert_eq!(json["aggregate"]["total_samples"], 1000);

    let direct = metrics_from_files(&run, &reference).unwrap();
    assert_eq!(direct.per_vbias.iter().map(|m| m.n_samples).collect::<Vec<_>>(), vec![100; 10]);
}

#[test]
fn tiny_reference() {
    let cfg = ExperimentConfig { points: 2, vbias_count: 1, ..ExperimentConfig::reference() };
    let rec = run_reference(&cfg, &CircuitParams::default()).unwrap();
    assert_eq!(rec.len(), 2);
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");

    // Validation: too few points.
    let st = bin().args(["sweep", "--direct", "--points", "1", "--out"]).arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(2));
    assert!(!out.exists());

    // Runtime: nobody listening.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let st = bin().args(["sweep", "--port", &port.to_string(), "--out"]).arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(1));
    assert!(!out.exists());

    // Mismatched vbias grids.
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(bin().args(["reference", "--points", "10", "--vbias-count", "3", "--out"]).arg(&a).status().unwrap().success());
    assert!(bin().args(["reference", "--points", "10", "--vbias-count", "4", "--out"]).arg(&b).status().unwrap().success());
    let st = bin().args(["metrics", "--run"]).arg(&a).arg("--ref").arg(&b).status().unwrap();
    assert_eq!(st.code(), Some(2));

    // Unparseable arguments.
    assert_eq!(bin().args(["sweep", "--mode", "random"]).status().unwrap().code(), Some(2));
}

#[test]
fn serve_reports_bind_failure() {
    let held = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port();
    let st = bin().args(["serve", "--bind", "127.0.0.1", "--port", &port.to_string()]).status().unwrap();
    assert_eq!(st.code(), Some(1));
    let st = bin().args(["serve", "--bind", "127.0.0.1"]).env("LABBENCH_PORT", port.to_string()).status().unwrap();
    assert_eq!(st.code(), Some(1));
}

#[test]
fn list_cli() {
    let server = spawn_local(&BenchConfig::default(), ServerOptions::default()).unwrap();
    let out = bin().args(["list", "--port", &server.port().to_string()]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "EDU36311A PSU-001 PSU\nEDU34450A DMM-001 DMM\n");
}

#[test]
fn uniform_regression_baseline() {
    let c = CircuitParams::default();
    let reference = run_reference(&ExperimentConfig::reference(), &c).unwrap();
    let uniform = run_reference(&ExperimentConfig { points: 100, ..ExperimentConfig::reference() }, &c).unwrap();
    let report = labbench_core::metrics::compare(&uniform, &reference).unwrap();
    let a = report.aggregate;
    // Frozen from this implementation; an independent numpy bisection +
    // np.interp computation gives 9.35452532e-2.
    assert!((a.steepest_vbias - 5.0 / 3.0).abs() < 1e-12);
    assert!((a.steepest_rmse / 9.354525339e-2 - 1.0).abs() < 1e-6, "{}", a.steepest_rmse);
    assert_eq!(report.per_vbias.iter().map(|m| m.n_samples).sum::<usize>(), 1000);
}
