//! Experiment orchestration: dense noiseless reference sweeps, budgeted
//! sweeps through a bench (remote or in-process), and metrics.

use std::path::Path;

use labbench_core::circuit::{transfer_curve, CircuitError};
use labbench_core::config::ConfigError;
use labbench_core::metrics::{compare, MetricsError};
use labbench_core::record::RecordError;
use labbench_core::sampler::{run_gwass, uniform_sweep, AllocationMode, SamplingError};
use labbench_core::scpi::parse_number;
use labbench_core::{Bench, Budget, CircuitParams, Domain, GwassConfig, MetricsReport, RunRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::client::{encode_set_current_limit, encode_set_output, encode_set_voltage, BridgeSession, ClientError, MEASURE_VOLTAGE};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Validation(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("instrument reported: {0}")]
    Instrument(String),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

impl HarnessError {
    /// Bad input as opposed to something failing at run time.
    pub fn is_validation(&self) -> bool {
        match self {
            HarnessError::Validation(_) | HarnessError::Config(_) | HarnessError::Metrics(_) => true,
            HarnessError::Record(e) => !matches!(e, RecordError::Io(_)),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Uniform,
    Gwass,
    Reference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Samples per curve (the budget in GWASS mode).
    pub points: usize,
    pub coarse_fraction: f64,
    pub epsilon: f64,
    pub allocation: AllocationMode,
    pub vbias_lo: f64,
    pub vbias_hi: f64,
    pub vbias_count: usize,
    pub vin_lo: f64,
    pub vin_hi: f64,
    pub vdd: f64,
    pub current_limit: f64,
    pub seed: u64,
    pub vin_channel: u8,
    pub vdd_channel: u8,
    pub vbias_channel: u8,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Uniform,
            points: 100,
            coarse_fraction: labbench_core::Budget::DEFAULT_COARSE_FRACTION,
            epsilon: 0.01,
            allocation: AllocationMode::Multinomial,
            vbias_lo: 0.0,
            vbias_hi: 5.0,
            vbias_count: 10,
            vin_lo: 0.0,
            vin_hi: 5.0,
            vdd: 3.0,
            current_limit: 0.1,
            seed: 0,
            vin_channel: 1,
            vdd_channel: 2,
            vbias_channel: 3,
        }
    }
}

impl ExperimentConfig {
    pub fn reference() -> Self {
        Self { mode: Mode::Reference, points: 10_000, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Validation(m));
        if self.points < 2 {
            return bad(format!("points must be >= 2, got {}", self.points));
        }
        if self.vbias_count < 1 {
            return bad("vbias_count must be >= 1".into());
        }
        let finite = [self.vbias_lo, self.vbias_hi, self.vin_lo, self.vin_hi, self.vdd, self.current_limit, self.coarse_fraction, self.epsilon];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all voltages, limits and fractions must be finite".into());
        }
        if self.vbias_count > 1 && self.vbias_lo >= self.vbias_hi {
            return bad(format!("vbias range [{}, {}] is empty", self.vbias_lo, self.vbias_hi));
        }
        if self.vbias_count == 1 && self.vbias_lo > self.vbias_hi {
            return bad(format!("vbias range [{}, {}] is empty", self.vbias_lo, self.vbias_hi));
        }
        Domain::new(self.vin_lo, self.vin_hi).map_err(HarnessError::Validation)?;
        if self.vin_lo < 0.0 || self.vbias_lo < 0.0 || self.vdd < 0.0 {
            return bad("supply voltages must be non-negative".into());
        }
        if self.current_limit < 0.0 {
            return bad("current limit must be non-negative".into());
        }
        if self.mode == Mode::Gwass {
            Budget::new(self.points, self.coarse_fraction).map_err(HarnessError::Validation)?;
            if self.epsilon <= 0.0 {
                return bad(format!("epsilon must be > 0, got {}", self.epsilon));
            }
        }
        let ch = [self.vin_channel, self.vdd_channel, self.vbias_channel];
        let max = labbench_core::config::CHANNEL_COUNT as u8;
        if ch.iter().any(|c| !(1..=max).contains(c)) || ch[0] == ch[1] || ch[1] == ch[2] || ch[0] == ch[2] {
            return bad(format!("channels {ch:?} must be distinct and in 1..={max}"));
        }
        Ok(())
    }

    pub fn vbias_values(&self) -> Vec<f64> {
        if self.vbias_count == 1 {
            return vec![self.vbias_lo];
        }
        Domain { lo: self.vbias_lo, hi: self.vbias_hi }.linspace(self.vbias_count)
    }

    fn vin_domain(&self) -> Domain {
        Domain { lo: self.vin_lo, hi: self.vin_hi }
    }
}

/// Noiseless transfer curves straight from the circuit model.
pub fn run_reference(config: &ExperimentConfig, circuit: &CircuitParams) -> Result<RunRecord, HarnessError> {
    config.validate()?;
    circuit.validate()?;
    let vins = config.vin_domain().linspace(config.points);
    let mut record = RunRecord::new();
    for vbias in config.vbias_values() {
        record.push_curve(vbias, &transfer_curve(vbias, config.vdd, &vins, circuit)?);
    }
    Ok(record)
}

/// The instrument actions a sweep needs.
pub trait BenchDriver {
    /// Resets the meter (and with it the noise stream) and clears errors.
    fn prepare(&mut self) -> Result<(), HarnessError>;
    fn set_voltage(&mut self, channel: u8, volts: f64) -> Result<(), HarnessError>;
    fn set_current_limit(&mut self, channel: u8, amps: f64) -> Result<(), HarnessError>;
    fn set_output(&mut self, channel: u8, on: bool) -> Result<(), HarnessError>;
    /// Waits until every supply command sent so far has taken effect.
    fn settle(&mut self) -> Result<(), HarnessError>;
    fn measure_voltage(&mut self) -> Result<f64, HarnessError>;
    /// Fails if the supply has queued errors.
    fn check_supply_errors(&mut self) -> Result<(), HarnessError>;
}

fn check_error_reply(reply: &str) -> Result<(), HarnessError> {
    if reply.trim_start().starts_with('0') || reply.trim_start().starts_with("+0") {
        Ok(())
    } else {
        Err(HarnessError::Instrument(reply.to_string()))
    }
}

/// Drives a bench through a bridge server: one PSU session, one DMM session.
pub struct RemoteBench {
    pub psu: BridgeSession,
    pub dmm: BridgeSession,
}

impl RemoteBench {
    pub fn connect(host: &str, port: u16, psu: &str, dmm: &str) -> Result<Self, HarnessError> {
        Ok(Self { psu: BridgeSession::connect(host, port, psu)?, dmm: BridgeSession::connect(host, port, dmm)? })
    }
}

impl BenchDriver for RemoteBench {
    fn prepare(&mut self) -> Result<(), HarnessError> {
        self.dmm.command("*RST;*CLS")?;
        self.psu.command("*CLS")?;
        self.dmm.query("*OPC?")?;
        Ok(())
    }

    fn set_voltage(&mut self, channel: u8, volts: f64) -> Result<(), HarnessError> {
        Ok(self.psu.set_voltage(channel, volts)?)
    }

    fn set_current_limit(&mut self, channel: u8, amps: f64) -> Result<(), HarnessError> {
        Ok(self.psu.set_current_limit(channel, amps)?)
    }

    fn set_output(&mut self, channel: u8, on: bool) -> Result<(), HarnessError> {
        Ok(self.psu.set_output(channel, on)?)
    }

    fn settle(&mut self) -> Result<(), HarnessError> {
        // PSU and DMM have separate queues; a query on the PSU session
        // returns only after everything queued before it has executed.
        self.psu.query("*OPC?")?;
        Ok(())
    }

    fn measure_voltage(&mut self) -> Result<f64, HarnessError> {
        Ok(self.dmm.measure_voltage()?)
    }

    fn check_supply_errors(&mut self) -> Result<(), HarnessError> {
        check_error_reply(&self.psu.query("SYST:ERR?")?)
    }
}

/// Same SCPI traffic as [`RemoteBench`], executed on an in-process bench.
pub struct LocalBench {
    pub bench: Bench,
    psu: String,
    dmm: String,
}

impl LocalBench {
    pub fn new(bench: Bench) -> Self {
        let id = |kind| bench.registry().iter().find(|i| i.kind == kind).map(|i| i.serial.clone()).expect("validated bench");
        let psu = id(labbench_core::InstrumentKind::Psu);
        let dmm = id(labbench_core::InstrumentKind::Dmm);
        Self { bench, psu, dmm }
    }

    fn run(&mut self, serial_is_psu: bool, message: &str) -> Vec<String> {
        let serial = if serial_is_psu { &self.psu } else { &self.dmm };
        self.bench.execute(serial, message).expect("serial from registry")
    }
}

impl BenchDriver for LocalBench {
    fn prepare(&mut self) -> Result<(), HarnessError> {
        self.run(false, "*RST;*CLS");
        self.run(true, "*CLS");
        Ok(())
    }

    fn set_voltage(&mut self, channel: u8, volts: f64) -> Result<(), HarnessError> {
        self.run(true, &encode_set_voltage(channel, volts));
        Ok(())
    }

    fn set_current_limit(&mut self, channel: u8, amps: f64) -> Result<(), HarnessError> {
        self.run(true, &encode_set_current_limit(channel, amps));
        Ok(())
    }

    fn set_output(&mut self, channel: u8, on: bool) -> Result<(), HarnessError> {
        self.run(true, &encode_set_output(channel, on));
        Ok(())
    }

    fn settle(&mut self) -> Result<(), HarnessError> {
        Ok(())
    }

    fn measure_voltage(&mut self) -> Result<f64, HarnessError> {
        let reply = self.run(false, MEASURE_VOLTAGE);
        let text = reply.first().cloned().unwrap_or_default();
        parse_number(&text).as_number().ok_or(HarnessError::Instrument(format!("bad reading {text:?}")))
    }

    fn check_supply_errors(&mut self) -> Result<(), HarnessError> {
        let reply = self.run(true, "SYST:ERR?");
        check_error_reply(reply.first().map(String::as_str).unwrap_or(""))
    }
}

fn sampling_error(e: SamplingError<f64, HarnessError>) -> HarnessError {
    match e {
        SamplingError::Invalid(m) => HarnessError::Validation(m),
        SamplingError::Oracle { cause, .. } => cause,
    }
}

/// Sets up the supply, sweeps every bias curve, and switches the outputs
/// off again whether or not the sweep succeeded.
pub fn run_sweep<D: BenchDriver>(driver: &mut D, config: &ExperimentConfig) -> Result<RunRecord, HarnessError> {
    config.validate()?;
    if config.mode == Mode::Reference {
        return Err(HarnessError::Validation("reference mode runs against the model, not a bench".into()));
    }
    let channels = [config.vin_channel, config.vdd_channel, config.vbias_channel];
    let result = sweep_body(driver, config, channels);
    let mut off = Ok(());
    for ch in channels {
        if let Err(e) = driver.set_output(ch, false) {
            off = Err(e);
            break;
        }
    }
    let record = result?;
    off?;
    driver.settle()?;
    Ok(record)
}

fn sweep_body<D: BenchDriver>(driver: &mut D, config: &ExperimentConfig, channels: [u8; 3]) -> Result<RunRecord, HarnessError> {
    driver.prepare()?;
    for ch in channels {
        driver.set_current_limit(ch, config.current_limit)?;
    }
    driver.set_voltage(config.vdd_channel, config.vdd)?;
    driver.set_voltage(config.vin_channel, config.vin_lo)?;
    driver.set_voltage(config.vbias_channel, config.vbias_lo)?;
    for ch in channels {
        driver.set_output(ch, true)?;
    }
    driver.settle()?;
    driver.check_supply_errors()?;

    let gwass = GwassConfig { epsilon: config.epsilon, seed: config.seed, stratified: true, allocation: config.allocation };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut record = RunRecord::new();
    for vbias in config.vbias_values() {
        driver.set_voltage(config.vbias_channel, vbias)?;
        let mut oracle = |vin: f64| -> Result<f64, HarnessError> {
            driver.set_voltage(config.vin_channel, vin)?;
            driver.settle()?;
            driver.measure_voltage()
        };
        let samples = match config.mode {
            Mode::Gwass => {
                let budget = Budget::new(config.points, config.coarse_fraction).map_err(HarnessError::Validation)?;
                run_gwass(&mut oracle, config.vin_domain(), budget, &gwass, &mut rng)
            }
            _ => uniform_sweep(&mut oracle, config.vin_domain(), config.points),
        }
        .map_err(sampling_error)?;
        record.push_curve(vbias, &samples.points);
    }
    Ok(record)
}

/// Writes the CSV, removing whatever was written if that fails.
pub fn save_record(record: &RunRecord, path: &Path) -> Result<(), HarnessError> {
    record.save(path).map_err(|e| {
        let _ = std::fs::remove_file(path);
        HarnessError::from(e)
    })
}

pub fn metrics_from_files(run: &Path, reference: &Path) -> Result<MetricsReport, HarnessError> {
    let run = RunRecord::load(run)?;
    let reference = RunRecord::load(reference)?;
    Ok(compare(&run, &reference)?)
}
