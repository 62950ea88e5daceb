//! DC voltmeter, modeled on the EDU34450A. Readings come from the circuit
//! model plus seeded Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::bench::{shared_command, single_arg, MeasurementContext, Shared};
use super::InstrumentId;
use crate::scpi::{format_nr3, mnemonic_matches, Arg, CommandUnit, ErrorQueue, Keyword, ScpiError};

/// Largest DC voltage range of the meter (V).
pub const MAX_RANGE: f64 = 1000.0;
const MIN_RANGE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DmmRange {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct DmmState {
    pub id: InstrumentId,
    /// Only DC volts is implemented, so the function is implicit.
    pub range: DmmRange,
    pub errors: ErrorQueue,
    noise_seed: u64,
    rng: ChaCha8Rng,
}

impl DmmState {
    pub fn new(id: InstrumentId, noise_seed: u64) -> Self {
        Self { id, range: DmmRange::Auto, errors: ErrorQueue::new(), noise_seed, rng: ChaCha8Rng::seed_from_u64(noise_seed) }
    }

    /// `*RST`: auto range, and the noise generator restarts from its seed so
    /// a reset bench replays the same reading sequence.
    pub fn reset(&mut self) {
        self.range = DmmRange::Auto;
        self.rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
    }

    /// One noisy reading at the bench's present operating point.
    pub fn measure(&mut self, ctx: &MeasurementContext<'_>) -> f64 {
        let sigma = ctx.circuit.noise_sigma;
        let noise = Normal::new(0.0, sigma).expect("validated sigma").sample(&mut self.rng);
        ctx.noiseless_vout() + noise
    }

    pub fn execute(&mut self, unit: &CommandUnit, ctx: &MeasurementContext<'_>) -> Option<String> {
        match shared_command(unit, &self.id, &mut self.errors) {
            Shared::Handled(response) => return response,
            Shared::Reset => {
                self.reset();
                return None;
            }
            Shared::Unhandled => {}
        }
        match self.dispatch(unit, ctx) {
            Ok(response) => response,
            Err(err) => {
                self.errors.push(err);
                None
            }
        }
    }

    fn dispatch(&mut self, unit: &CommandUnit, ctx: &MeasurementContext<'_>) -> Result<Option<String>, ScpiError> {
        if unit.is_common {
            return Err(ScpiError::UNDEFINED_HEADER);
        }
        let path: Vec<&str> = unit.path.iter().map(String::as_str).collect();
        match (path.as_slice(), unit.is_query) {
            (["READ"], true) | (["MEAS"] | ["MEAS", "VOLT"] | ["MEAS", "VOLT", "DC"], true) => {
                if path[0] == "MEAS" {
                    if let Some(arg) = unit.args.first() {
                        self.range = parse_range(arg)?;
                    }
                }
                Ok(Some(format_nr3(self.measure(ctx))))
            }
            (["CONF", "VOLT"] | ["CONF", "VOLT", "DC"], false) => {
                self.range = match unit.args.first() {
                    Some(arg) => parse_range(arg)?,
                    None => DmmRange::Auto,
                };
                Ok(None)
            }
            (["CONF"], true) => Ok(Some(format!(
                "\"VOLT {}\"",
                format_nr3(match self.range {
                    DmmRange::Auto => MAX_RANGE,
                    DmmRange::Fixed(r) => r,
                })
            ))),
            (["SENS", "VOLT", "DC", "RANG"] | ["VOLT", "DC", "RANG"] | ["SENS", "VOLT", "RANG"] | ["VOLT", "RANG"], q) => {
                if q {
                    return Ok(Some(match self.range {
                        DmmRange::Auto => format_nr3(MAX_RANGE),
                        DmmRange::Fixed(r) => format_nr3(r),
                    }));
                }
                self.range = parse_range(single_arg(unit)?)?;
                Ok(None)
            }
            _ => Err(ScpiError::UNDEFINED_HEADER),
        }
    }
}

fn parse_range(arg: &Arg) -> Result<DmmRange, ScpiError> {
    match arg {
        Arg::Keyword(Keyword::Min) => Ok(DmmRange::Fixed(MIN_RANGE)),
        Arg::Keyword(Keyword::Max) => Ok(DmmRange::Fixed(MAX_RANGE)),
        Arg::Number(v) if *v > 0.0 && *v <= MAX_RANGE => Ok(DmmRange::Fixed(*v)),
        Arg::Token(t) if mnemonic_matches(t, "AUTO") || mnemonic_matches(t, "DEFault") => Ok(DmmRange::Auto),
        _ => Err(ScpiError::DATA_OUT_OF_RANGE),
    }
}
