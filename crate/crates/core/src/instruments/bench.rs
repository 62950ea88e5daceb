use super::{DmmState, InstrumentId, InstrumentKind, PsuState, Registry};
use crate::circuit::{solve_vout, CircuitParams, OperatingPoint};
use crate::config::{BenchConfig, BenchWiring, ConfigError};
use crate::scpi::{Arg, CommandUnit, ErrorQueue, Parser, ScpiError};

pub(crate) enum Shared {
    Handled(Option<String>),
    Reset,
    Unhandled,
}

/// Commands every instrument understands: `*IDN?`, `*RST`, `*CLS`, `*OPC`,
/// `*OPC?` and `SYST:ERR[:NEXT]?`.
pub(crate) fn shared_command(unit: &CommandUnit, id: &InstrumentId, errors: &mut ErrorQueue) -> Shared {
    if unit.is_common {
        return match (unit.path[0].as_str(), unit.is_query) {
            ("IDN", true) => Shared::Handled(Some(id.idn())),
            ("RST", false) => Shared::Reset,
            ("CLS", false) => {
                errors.clear();
                Shared::Handled(None)
            }
            ("OPC", true) => Shared::Handled(Some("+1".to_string())),
            ("OPC", false) => Shared::Handled(None),
            _ => Shared::Unhandled,
        };
    }
    if unit.is_query && (unit.path_is(&["SYST", "ERR"]) || unit.path_is(&["SYST", "ERR", "NEXT"])) {
        return Shared::Handled(Some(errors.pop().to_response()));
    }
    Shared::Unhandled
}

pub(crate) fn single_arg(unit: &CommandUnit) -> Result<&Arg, ScpiError> {
    unit.args.first().ok_or(ScpiError::MISSING_PARAMETER)
}

/// What a meter reading depends on: supply outputs, wiring and physics.
#[derive(Debug, Clone, Copy)]
pub struct MeasurementContext<'a> {
    pub psu: &'a PsuState,
    pub wiring: &'a BenchWiring,
    pub circuit: &'a CircuitParams<f64>,
}

impl MeasurementContext<'_> {
    /// Node voltages as seen by the circuit; an output that is off is a hard
    /// 0 V.
    pub fn operating_point(&self) -> OperatingPoint<f64> {
        let v = |ch: u8| self.psu.channel(ch).output_voltage();
        OperatingPoint::new(v(self.wiring.vin_channel), v(self.wiring.vbias_channel), v(self.wiring.vdd_channel))
    }

    pub fn noiseless_vout(&self) -> f64 {
        let op = self.operating_point();
        if op.vdd <= 0.0 {
            // Unpowered: the output node discharges through the leak.
            return 0.0;
        }
        solve_vout(op, self.circuit).expect("finite supply settings")
    }
}

/// The whole simulated bench: instruments, wiring and circuit.
///
/// Every meter reads the supply listed first in the configuration.
#[derive(Debug, Clone)]
pub struct Bench {
    registry: Registry,
    psus: Vec<PsuState>,
    dmms: Vec<DmmState>,
    wiring: BenchWiring,
    circuit: CircuitParams<f64>,
    parser: Parser,
}

impl Bench {
    pub fn new(config: &BenchConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut ids = Vec::new();
        let mut psus = Vec::new();
        let mut dmms = Vec::new();
        let mut wiring = config.wiring;
        wiring.noise_seed = config.effective_noise_seed();
        for inst in &config.instruments {
            let id = InstrumentId { model: inst.model.clone(), serial: inst.serial.clone(), kind: inst.kind };
            match inst.kind {
                InstrumentKind::Psu => psus.push(PsuState::new(id.clone(), inst.volt_max, inst.curr_max)),
                InstrumentKind::Dmm => dmms.push(DmmState::new(id.clone(), wiring.noise_seed)),
            }
            ids.push(id);
        }
        Ok(Self { registry: Registry::new(ids), psus, dmms, wiring, circuit: config.circuit, parser: Parser::default() })
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn wiring(&self) -> &BenchWiring {
        &self.wiring
    }

    pub fn circuit(&self) -> &CircuitParams<f64> {
        &self.circuit
    }

    /// The supply the circuit is wired to.
    pub fn wired_psu(&self) -> &PsuState {
        &self.psus[0]
    }

    pub fn psu(&self, serial: &str) -> Option<&PsuState> {
        self.psus.iter().find(|p| p.id.serial.eq_ignore_ascii_case(serial))
    }

    pub fn dmm(&self, serial: &str) -> Option<&DmmState> {
        self.dmms.iter().find(|d| d.id.serial.eq_ignore_ascii_case(serial))
    }

    pub fn context(&self) -> MeasurementContext<'_> {
        MeasurementContext { psu: &self.psus[0], wiring: &self.wiring, circuit: &self.circuit }
    }

    /// Runs one program message on the instrument with the given serial and
    /// returns the response of each query, in order. Syntax errors are queued
    /// on the instrument and abort the whole message.
    ///
    /// Returns `None` for an unknown serial.
    pub fn execute(&mut self, serial: &str, message: &str) -> Option<Vec<String>> {
        let parsed = self.parser.parse_message(message);
        if let Some(i) = self.psus.iter().position(|p| p.id.serial.eq_ignore_ascii_case(serial)) {
            let psu = &mut self.psus[i];
            return Some(match parsed {
                Ok(units) => units.iter().filter_map(|u| psu.execute(u)).collect(),
                Err(err) => {
                    psu.errors.push(err);
                    Vec::new()
                }
            });
        }
        let i = self.dmms.iter().position(|d| d.id.serial.eq_ignore_ascii_case(serial))?;
        let ctx = MeasurementContext { psu: &self.psus[0], wiring: &self.wiring, circuit: &self.circuit };
        let dmm = &mut self.dmms[i];
        Some(match parsed {
            Ok(units) => units.iter().filter_map(|u| dmm.execute(u, &ctx)).collect(),
            Err(err) => {
                dmm.errors.push(err);
                Vec::new()
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scpi::parse_number;

    fn bench() -> Bench {
        Bench::new(&BenchConfig::default()).unwrap()
    }

    fn read(b: &mut Bench) -> f64 {
        let r = b.execute("DMM-001", "READ?").unwrap();
        parse_number(&r[0]).as_number().unwrap()
    }

    fn power(b: &mut Bench, vin: f64, vdd: f64, vbias: f64) {
        b.execute("PSU-001", &format!("INST:NSEL 1;:VOLT {vin};OUTP ON")).unwrap();
        b.execute("PSU-001", &format!("INST:NSEL 2;:VOLT {vdd};OUTP ON")).unwrap();
        b.execute("PSU-001", &format!("INST:NSEL 3;:VOLT {vbias};OUTP ON")).unwrap();
    }

    #[test]
    fn output_high_with_driver_off() {
        let mut b = bench();
        power(&mut b, 0.0, 3.0, 0.0);
        let v = read(&mut b);
        assert!((v - 3.0).abs() < 1e-3, "{v}");
    }

    #[test]
    fn unpowered_bench_reads_zero() {
        let mut b = bench();
        let v = read(&mut b);
        assert!(v.abs() < 10.0 * 8.58e-7, "{v}");
    }

    #[test]
    fn off_channel_acts_as_ground() {
        let mut b = bench();
        power(&mut b, 2.3, 3.0, 1.2);
        b.execute("PSU-001", "INST:NSEL 3;:OUTP OFF").unwrap();
        let mut reference = bench();
        power(&mut reference, 2.3, 3.0, 0.0);
        assert_eq!(b.context().noiseless_vout(), reference.context().noiseless_vout());
        assert_eq!(read(&mut b), read(&mut reference));
    }

    #[test]
    fn measurement_aliases_and_configuration() {
        let mut b = bench();
        power(&mut b, 0.0, 3.0, 0.0);
        b.execute("DMM-001", "*RST").unwrap();
        let a = b.execute("DMM-001", "MEAS:VOLT:DC?;:MEAS:VOLT?;:MEASure?").unwrap();
        assert_eq!(a.len(), 3);
        assert!(b.execute("DMM-001", "CONF:VOLT:DC 10").unwrap().is_empty());
        assert_eq!(b.dmm("DMM-001").unwrap().range, crate::instruments::DmmRange::Fixed(10.0));
        assert_eq!(b.execute("DMM-001", "CONF?").unwrap(), ["\"VOLT 1.00000000E+01\""]);
        b.execute("DMM-001", "CONF:VOLT:DC AUTO").unwrap();
        assert_eq!(b.dmm("DMM-001").unwrap().range, crate::instruments::DmmRange::Auto);
        assert_eq!(b.execute("DMM-001", "*IDN?").unwrap(), ["LABBENCH,EDU34450A,DMM-001,0.1"]);
    }

    #[test]
    fn dmm_errors() {
        let mut b = bench();
        b.execute("DMM-001", "VOLT 3").unwrap();
        b.execute("DMM-001", "READ").unwrap();
        b.execute("DMM-001", "VOLT:DC:RANG").unwrap();
        b.execute("DMM-001", "CONF:VOLT:DC -5").unwrap();
        b.execute("DMM-001", "MEAS:VOLT:DC?? ").unwrap();
        let errs = b.execute("DMM-001", "SYST:ERR?;ERR?;ERR?;ERR?;ERR?;ERR?").unwrap();
        assert_eq!(
            errs,
            [
                "-113,\"Undefined header\"",
                "-113,\"Undefined header\"",
                "-109,\"Missing parameter\"",
                "-222,\"Data out of range\"",
                "-102,\"Syntax error\"",
                "0,\"No error\"",
            ]
        );
    }

    #[test]
    fn reset_replays_noise_sequence() {
        let mut b = bench();
        power(&mut b, 2.4, 3.0, 1.0);
        let first: Vec<f64> = (0..5).map(|_| read(&mut b)).collect();
        b.execute("DMM-001", "*RST").unwrap();
        let second: Vec<f64> = (0..5).map(|_| read(&mut b)).collect();
        assert_eq!(first, second);
        assert!(first.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn unknown_serial() {
        assert!(bench().execute("NOPE", "*IDN?").is_none());
    }
}
