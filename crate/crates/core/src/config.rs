//! Bench configuration file (JSON).
//!
//! Every field has a default, so `{}` describes the reference bench: one
//! EDU36311A supply, one EDU34450A meter, channel 1 → V_in, channel 2 → V_DD,
//! channel 3 → V_bias, listening on port 5025.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{CircuitError, CircuitParams};
use crate::instruments::InstrumentKind;

pub const DEFAULT_PORT: u16 = 5025;
pub const CHANNEL_COUNT: usize = 3;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate serial {0:?}")]
    DuplicateSerial(String),
    #[error("wiring channels must be distinct values in 1..=3 (got vin={vin}, vdd={vdd}, vbias={vbias})")]
    BadWiring { vin: u8, vdd: u8, vbias: u8 },
    #[error("bench needs at least one {0} instrument")]
    MissingInstrument(InstrumentKind),
    #[error("instrument {serial}: {reason}")]
    BadInstrument { serial: String, reason: String },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Which supply channel drives which circuit node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchWiring {
    pub vin_channel: u8,
    pub vdd_channel: u8,
    pub vbias_channel: u8,
    pub noise_seed: u64,
}

impl Default for BenchWiring {
    fn default() -> Self {
        Self { vin_channel: 1, vdd_channel: 2, vbias_channel: 3, noise_seed: 0 }
    }
}

impl BenchWiring {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let chans = [self.vin_channel, self.vdd_channel, self.vbias_channel];
        let in_range = chans.iter().all(|c| (1..=CHANNEL_COUNT as u8).contains(c));
        let distinct = chans.iter().collect::<HashSet<_>>().len() == 3;
        if !in_range || !distinct {
            return Err(ConfigError::BadWiring { vin: self.vin_channel, vdd: self.vdd_channel, vbias: self.vbias_channel });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentConfig {
    pub model: String,
    pub serial: String,
    pub kind: InstrumentKind,
    /// Per-channel voltage ceiling (PSU only).
    #[serde(default = "default_volt_max")]
    pub volt_max: [f64; CHANNEL_COUNT],
    /// Per-channel current-limit ceiling (PSU only).
    #[serde(default = "default_curr_max")]
    pub curr_max: [f64; CHANNEL_COUNT],
}

fn default_volt_max() -> [f64; CHANNEL_COUNT] {
    [6.0, 25.0, 25.0]
}

fn default_curr_max() -> [f64; CHANNEL_COUNT] {
    [5.0, 1.0, 1.0]
}

impl InstrumentConfig {
    pub fn psu(model: &str, serial: &str) -> Self {
        Self {
            model: model.into(),
            serial: serial.into(),
            kind: InstrumentKind::Psu,
            volt_max: default_volt_max(),
            curr_max: default_curr_max(),
        }
    }

    pub fn dmm(model: &str, serial: &str) -> Self {
        Self { kind: InstrumentKind::Dmm, ..Self::psu(model, serial) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub port: u16,
    pub instruments: Vec<InstrumentConfig>,
    pub wiring: BenchWiring,
    pub circuit: CircuitParams<f64>,
    /// Overrides `wiring.noise_seed` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_seed: Option<u64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            port: DEFAULT_PORT,
            instruments: vec![
                InstrumentConfig::psu("EDU36311A", "PSU-001"),
                InstrumentConfig::dmm("EDU34450A", "DMM-001"),
            ],
            wiring: BenchWiring::default(),
            circuit: CircuitParams::default(),
            noise_seed: None,
        }
    }
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn effective_noise_seed(&self) -> u64 {
        self.noise_seed.unwrap_or(self.wiring.noise_seed)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut seen = HashSet::new();
        for inst in &self.instruments {
            if !seen.insert(inst.serial.to_ascii_uppercase()) {
                return Err(ConfigError::DuplicateSerial(inst.serial.clone()));
            }
            let bad = |reason: &str| ConfigError::BadInstrument { serial: inst.serial.clone(), reason: reason.into() };
            if inst.model.trim().is_empty() || inst.serial.trim().is_empty() {
                return Err(bad("model and serial must be non-empty"));
            }
            if inst.model.contains(char::is_whitespace) || inst.serial.contains(char::is_whitespace) {
                return Err(bad("model and serial must not contain whitespace"));
            }
            if inst.volt_max.iter().chain(&inst.curr_max).any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(bad("channel maxima must be finite and non-negative"));
            }
        }
        for kind in [InstrumentKind::Psu, InstrumentKind::Dmm] {
            if !self.instruments.iter().any(|i| i.kind == kind) {
                return Err(ConfigError::MissingInstrument(kind));
            }
        }
        self.wiring.validate()?;
        self.circuit.validate()?;
        Ok(())
    }
}
