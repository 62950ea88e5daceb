//! Simulated measurement bench: a two-transistor inverting amplifier behind a
//! virtual three-channel supply and a DC voltmeter, a SCPI parser to drive
//! them, and budgeted samplers (uniform and gradient-weighted adaptive) to
//! extract its transfer curves.
//!
//! The numeric modules are generic over [`Scalar`]; the aliases below fix the
//! scalar to `f64` (what the bench and wire formats use) or `f32`.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod config;
pub mod instruments;
pub mod metrics;
pub mod record;
pub mod sampler;
pub mod scalar;
pub mod scpi;

pub use scalar::Scalar;

pub type MosfetParams = circuit::MosfetParams<f64>;
pub type CircuitParams = circuit::CircuitParams<f64>;
pub type OperatingPoint = circuit::OperatingPoint<f64>;
pub type Domain = sampler::Domain<f64>;
pub type GwassConfig = sampler::GwassConfig<f64>;
pub type SampleSet = sampler::SampleSet<f64>;
pub type RunRecord = record::RunRecord<f64>;
pub type MetricsReport = metrics::MetricsReport<f64>;

pub type MosfetParamsF32 = circuit::MosfetParams<f32>;
pub type CircuitParamsF32 = circuit::CircuitParams<f32>;
pub type OperatingPointF32 = circuit::OperatingPoint<f32>;
pub type DomainF32 = sampler::Domain<f32>;
pub type GwassConfigF32 = sampler::GwassConfig<f32>;
pub type SampleSetF32 = sampler::SampleSet<f32>;
pub type RunRecordF32 = record::RunRecord<f32>;
pub type MetricsReportF32 = metrics::MetricsReport<f32>;

pub use config::{BenchConfig, BenchWiring};
pub use instruments::{Bench, InstrumentId, InstrumentKind};
pub use sampler::Budget;
