use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use labbench::harness::{metrics_from_files, save_record};
use labbench::server::{Server, ServerOptions};
use labbench::{client, run_reference, run_sweep, ExperimentConfig, HarnessError, LocalBench, Mode, RemoteBench};
use labbench_core::sampler::AllocationMode;
use labbench_core::{Bench, BenchConfig};

#[derive(Parser)]
#[command(name = "labbench", version, about = "Simulated measurement bench: bridge server and sweep harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the bench over TCP until interrupted.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides LABBENCH_PORT and the config file.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "0.0.0.0")]
        bind: String,
    },
    /// Dense noiseless sweep computed from the circuit model.
    Reference {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Budgeted sweep through a bridge server (or an in-process bench).
    Sweep {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = labbench_core::config::DEFAULT_PORT)]
        port: u16,
        #[arg(long, value_enum, default_value_t = SweepMode::Uniform)]
        mode: SweepMode,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long = "coarse-frac", default_value_t = labbench_core::Budget::DEFAULT_COARSE_FRACTION)]
        coarse_frac: f64,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        /// Deterministic largest-remainder allocation instead of multinomial.
        #[arg(long)]
        largest_remainder: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        ilimit: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "EDU36311A")]
        psu: String,
        #[arg(long, default_value = "EDU34450A")]
        dmm: String,
        /// Skip the network and drive an in-process bench.
        #[arg(long)]
        direct: bool,
        /// Bench configuration for --direct.
        #[arg(long, requires = "direct")]
        config: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Compare a run against a reference and write a JSON report.
    Metrics {
        #[arg(long)]
        run: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Show the instruments behind a bridge server.
    List {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = labbench_core::config::DEFAULT_PORT)]
        port: u16,
    },
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 0.0)]
    vbias_lo: f64,
    #[arg(long, default_value_t = 5.0)]
    vbias_hi: f64,
    #[arg(long, default_value_t = 10)]
    vbias_count: usize,
    #[arg(long, default_value_t = 0.0)]
    vin_lo: f64,
    #[arg(long, default_value_t = 5.0)]
    vin_hi: f64,
    #[arg(long, default_value_t = 3.0)]
    vdd: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    Uniform,
    Gwass,
}

impl GridArgs {
    fn apply(&self, cfg: ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            vbias_lo: self.vbias_lo,
            vbias_hi: self.vbias_hi,
            vbias_count: self.vbias_count,
            vin_lo: self.vin_lo,
            vin_hi: self.vin_hi,
            vdd: self.vdd,
            ..cfg
        }
    }
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<BenchConfig, Failure> {
    let config = match path {
        Some(p) => BenchConfig::load(p).map_err(|e| Failure::Validation(format!("{}: {e}", p.display())))?,
        None => BenchConfig::default(),
    };
    config.validate().map_err(|e| Failure::Validation(e.to_string()))?;
    Ok(config)
}

fn serve(config: Option<PathBuf>, port: Option<u16>, bind: &str) -> Result<(), Failure> {
    let config = load_config(config.as_deref())?;
    let env_port = match std::env::var("LABBENCH_PORT") {
        Ok(v) => Some(v.trim().parse::<u16>().map_err(|_| Failure::Validation(format!("LABBENCH_PORT={v:?} is not a port")))?),
        Err(_) => None,
    };
    let port = port.or(env_port).unwrap_or(config.port);
    let ip = bind.parse().map_err(|_| Failure::Validation(format!("bad bind address {bind:?}")))?;
    let addr = SocketAddr::new(ip, port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
    runtime.block_on(async {
        let server = Server::bind(&config, addr, ServerOptions::default()).await.map_err(|e| Failure::Runtime(e.to_string()))?;
        let local = server.local_addr().map_err(|e| Failure::Runtime(e.to_string()))?;
        log::info!("serving {} instruments on {local}", config.instruments.len());
        let report = server
            .run(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await;
        log::info!("stopped after {} messages", report.executed);
        Ok(())
    })
}

fn sweep(cfg: &ExperimentConfig, driver: &mut dyn FnMut(&ExperimentConfig) -> Result<labbench_core::RunRecord, HarnessError>, out: &Path) -> Result<(), Failure> {
    cfg.validate()?;
    let record = driver(cfg)?;
    save_record(&record, out)?;
    eprintln!("wrote {} rows to {}", record.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Serve { config, port, bind } => serve(config, port, &bind),
        Command::Reference { config, points, out, grid } => {
            let bench = load_config(config.as_deref())?;
            let cfg = grid.apply(ExperimentConfig { points, ..ExperimentConfig::reference() });
            sweep(&cfg, &mut |c| run_reference(c, &bench.circuit), &out)
        }
        Command::Sweep { host, port, mode, points, coarse_frac, epsilon, largest_remainder, seed, ilimit, out, psu, dmm, direct, config, grid } => {
            let cfg = grid.apply(ExperimentConfig {
                mode: match mode {
                    SweepMode::Uniform => Mode::Uniform,
                    SweepMode::Gwass => Mode::Gwass,
                },
                points,
                coarse_fraction: coarse_frac,
                epsilon,
                allocation: if largest_remainder { AllocationMode::LargestRemainder } else { AllocationMode::Multinomial },
                seed,
                current_limit: ilimit,
                ..ExperimentConfig::default()
            });
            if direct {
                let bench = Bench::new(&load_config(config.as_deref())?).map_err(|e| Failure::Validation(e.to_string()))?;
                let mut drv = LocalBench::new(bench);
                sweep(&cfg, &mut |c| run_sweep(&mut drv, c), &out)
            } else {
                cfg.validate()?;
                let mut drv = RemoteBench::connect(&host, port, &psu, &dmm)?;
                sweep(&cfg, &mut |c| run_sweep::<RemoteBench>(&mut drv, c), &out)
            }
        }
        Command::Metrics { run, reference, out } => {
            let report = metrics_from_files(&run, &reference)?;
            let json = report.to_json();
            match out {
                Some(path) => std::fs::write(&path, json + "\n").map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::List { host, port } => {
            let rows = client::list(&host, port).map_err(|e| Failure::Runtime(e.to_string()))?;
            for r in rows {
                println!("{} {} {}", r.model, r.serial, r.kind);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
