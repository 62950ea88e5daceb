//! Three-channel programmable supply, modeled on the EDU36311A command set.

use super::bench::{shared_command, single_arg, Shared};
use super::InstrumentId;
use crate::config::CHANNEL_COUNT;
use crate::scpi::{format_nr3, Arg, CommandUnit, ErrorQueue, Keyword, ScpiError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    pub volt_set: f64,
    pub curr_limit: f64,
    pub output_on: bool,
    pub volt_max: f64,
    pub curr_max: f64,
}

impl ChannelState {
    fn reset(&mut self) {
        self.volt_set = 0.0;
        self.curr_limit = 0.0;
        self.output_on = false;
    }

    /// Voltage actually present on the terminals.
    pub fn output_voltage(&self) -> f64 {
        if self.output_on {
            self.volt_set
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsuState {
    pub id: InstrumentId,
    /// 1-based.
    pub selected_channel: u8,
    pub channels: [ChannelState; CHANNEL_COUNT],
    pub errors: ErrorQueue,
}

impl PsuState {
    pub fn new(id: InstrumentId, volt_max: [f64; CHANNEL_COUNT], curr_max: [f64; CHANNEL_COUNT]) -> Self {
        let channels = std::array::from_fn(|i| ChannelState {
            volt_set: 0.0,
            curr_limit: 0.0,
            output_on: false,
            volt_max: volt_max[i],
            curr_max: curr_max[i],
        });
        Self { id, selected_channel: 1, channels, errors: ErrorQueue::new() }
    }

    /// `*RST` defaults: every channel at 0 V / 0 A with output off, channel 1
    /// selected. The error queue is left alone.
    pub fn reset(&mut self) {
        self.channels.iter_mut().for_each(ChannelState::reset);
        self.selected_channel = 1;
    }

    /// 1-based channel accessor.
    pub fn channel(&self, channel: u8) -> &ChannelState {
        &self.channels[usize::from(channel - 1)]
    }

    fn selected_mut(&mut self) -> &mut ChannelState {
        &mut self.channels[usize::from(self.selected_channel - 1)]
    }

    /// Executes one command unit. Errors go to the error queue and produce
    /// no response.
    pub fn execute(&mut self, unit: &CommandUnit) -> Option<String> {
        match shared_command(unit, &self.id, &mut self.errors) {
            Shared::Handled(response) => return response,
            Shared::Reset => {
                self.reset();
                return None;
            }
            Shared::Unhandled => {}
        }
        match self.dispatch(unit) {
            Ok(response) => response,
            Err(err) => {
                self.errors.push(err);
                None
            }
        }
    }

    fn dispatch(&mut self, unit: &CommandUnit) -> Result<Option<String>, ScpiError> {
        if unit.is_common {
            return Err(ScpiError::UNDEFINED_HEADER);
        }
        let path: Vec<&str> = unit.path.iter().map(String::as_str).collect();
        let path = match path.as_slice() {
            ["SOUR", rest @ ..] if !rest.is_empty() => rest,
            other => other,
        };
        match path {
            ["INST", "NSEL"] | ["INST"] => {
                if unit.is_query {
                    return Ok(Some(format_nr3(f64::from(self.selected_channel))));
                }
                let n = match single_arg(unit)? {
                    Arg::Keyword(Keyword::Min) => 1.0,
                    Arg::Keyword(Keyword::Max) => CHANNEL_COUNT as f64,
                    Arg::Number(v) => *v,
                    _ => return Err(ScpiError::DATA_OUT_OF_RANGE),
                };
                if n.fract() != 0.0 || !(1.0..=CHANNEL_COUNT as f64).contains(&n) {
                    return Err(ScpiError::DATA_OUT_OF_RANGE);
                }
                self.selected_channel = n as u8;
                Ok(None)
            }
            ["VOLT", tail @ ..] if is_level_suffix(tail) => {
                let ch = self.selected_mut();
                if unit.is_query {
                    return Ok(Some(format_nr3(ch.volt_set)));
                }
                ch.volt_set = bounded_value(single_arg(unit)?, ch.volt_max)?;
                Ok(None)
            }
            ["CURR", tail @ ..] if is_level_suffix(tail) => {
                let ch = self.selected_mut();
                if unit.is_query {
                    return Ok(Some(format_nr3(ch.curr_limit)));
                }
                ch.curr_limit = bounded_value(single_arg(unit)?, ch.curr_max)?;
                Ok(None)
            }
            ["OUTP"] | ["OUTP", "STAT"] => {
                let ch = self.selected_mut();
                if unit.is_query {
                    return Ok(Some(if ch.output_on { "1" } else { "0" }.to_string()));
                }
                ch.output_on = match single_arg(unit)? {
                    Arg::Keyword(Keyword::On) => true,
                    Arg::Keyword(Keyword::Off) => false,
                    Arg::Number(v) if *v == 1.0 => true,
                    Arg::Number(v) if *v == 0.0 => false,
                    _ => return Err(ScpiError::DATA_OUT_OF_RANGE),
                };
                Ok(None)
            }
            _ => Err(ScpiError::UNDEFINED_HEADER),
        }
    }
}

/// Accepts the optional `[:LEVel[:IMMediate[:AMPLitude]]]` nodes.
fn is_level_suffix(tail: &[&str]) -> bool {
    const OPTIONAL: [&str; 3] = ["LEV", "IMM", "AMPL"];
    let mut expected = OPTIONAL.iter();
    tail.iter().all(|node| expected.any(|o| o == node))
}

fn bounded_value(arg: &Arg, max: f64) -> Result<f64, ScpiError> {
    let v = match arg {
        Arg::Keyword(Keyword::Min) => 0.0,
        Arg::Keyword(Keyword::Max) => max,
        Arg::Number(v) => *v,
        _ => return Err(ScpiError::DATA_OUT_OF_RANGE),
    };
    if !(0.0..=max).contains(&v) {
        return Err(ScpiError::DATA_OUT_OF_RANGE);
    }
    Ok(v)
}
