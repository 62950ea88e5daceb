//! Virtual instruments and the bench that wires them to the circuit model.

mod bench;
mod dmm;
mod psu;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bench::{Bench, MeasurementContext};
pub use dmm::{DmmRange, DmmState};
pub use psu::{ChannelState, PsuState};

/// Version field of every `*IDN?` response.
pub const FIRMWARE_VERSION: &str = "0.1";
pub const IDN_VENDOR: &str = "LABBENCH";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstrumentKind {
    #[serde(rename = "PSU")]
    Psu,
    #[serde(rename = "DMM")]
    Dmm,
}

impl fmt::Display for InstrumentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InstrumentKind::Psu => "PSU",
            InstrumentKind::Dmm => "DMM",
        })
    }
}

impl std::str::FromStr for InstrumentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "PSU" => Ok(InstrumentKind::Psu),
            "DMM" => Ok(InstrumentKind::Dmm),
            other => Err(format!("unknown instrument kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InstrumentId {
    pub model: String,
    pub serial: String,
    pub kind: InstrumentKind,
}

impl InstrumentId {
    pub fn idn(&self) -> String {
        format!("{IDN_VENDOR},{},{},{FIRMWARE_VERSION}", self.model, self.serial)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("instrument not found")]
    NotFound,
    #[error("ambiguous model")]
    AmbiguousModel,
}

/// Instruments on a bench, in configuration order.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    ids: Vec<InstrumentId>,
}

impl Registry {
    pub fn new(ids: Vec<InstrumentId>) -> Self {
        Self { ids }
    }

    pub fn iter(&self) -> impl Iterator<Item = &InstrumentId> {
        self.ids.iter()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Case-insensitive lookup, serial first, then model. A model shared by
    /// several instruments must be addressed by serial instead.
    pub fn resolve(&self, selector: &str) -> Result<&InstrumentId, ResolveError> {
        let selector = selector.trim();
        if let Some(id) = self.ids.iter().find(|id| id.serial.eq_ignore_ascii_case(selector)) {
            return Ok(id);
        }
        let mut by_model = self.ids.iter().filter(|id| id.model.eq_ignore_ascii_case(selector));
        match (by_model.next(), by_model.next()) {
            (Some(id), None) => Ok(id),
            (Some(_), Some(_)) => Err(ResolveError::AmbiguousModel),
            (None, _) => Err(ResolveError::NotFound),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(model: &str, serial: &str, kind: InstrumentKind) -> InstrumentId {
        InstrumentId { model: model.into(), serial: serial.into(), kind }
    }

    fn registry() -> Registry {
        Registry::new(vec![
            id("EDU36311A", "PSU-001", InstrumentKind::Psu),
            id("EDU34450A", "DMM-001", InstrumentKind::Dmm),
            id("EDU34450A", "DMM-002", InstrumentKind::Dmm),
        ])
    }

    #[test]
    fn resolves_by_model_or_serial() {
        let r = registry();
        assert_eq!(r.resolve("EDU36311A").unwrap().serial, "PSU-001");
        assert_eq!(r.resolve("edu36311a").unwrap().serial, "PSU-001");
        assert_eq!(r.resolve("DMM-001").unwrap().kind, InstrumentKind::Dmm);
        assert_eq!(r.resolve("dmm-002").unwrap().serial, "DMM-002");
    }

    #[test]
    fn resolve_errors() {
        let r = registry();
        assert_eq!(r.resolve("NOPE"), Err(ResolveError::NotFound));
        assert_eq!(r.resolve("EDU34450A"), Err(ResolveError::AmbiguousModel));
    }

    #[test]
    fn serial_wins_over_model() {
        let r = Registry::new(vec![id("X1", "X2", InstrumentKind::Psu), id("X2", "S", InstrumentKind::Dmm)]);
        assert_eq!(r.resolve("X2").unwrap().kind, InstrumentKind::Psu);
    }

    #[test]
    fn identity_string() {
        assert_eq!(id("EDU36311A", "PSU-001", InstrumentKind::Psu).idn(), "LABBENCH,EDU36311A,PSU-001,0.1");
    }
}
