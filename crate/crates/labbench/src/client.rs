//! Blocking client for the bridge protocol, with instrument-level verbs on
//! top of raw SCPI.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use labbench_core::scpi::{parse_message, parse_number};
use labbench_core::{InstrumentId, InstrumentKind};
use thiserror::Error;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot reach {addr}: {source}")]
    Connect { addr: String, source: std::io::Error },
    #[error("network error: {0}")]
    Network(std::io::Error),
    #[error("timed out waiting for a response")]
    Timeout,
    #[error("connection closed by server")]
    Closed,
    #[error("instrument not found: {0}")]
    NotFound(String),
    #[error("ambiguous model: {0}")]
    Ambiguous(String),
    #[error("unexpected server reply: {0:?}")]
    Protocol(String),
    #[error("{verb} needs a {expected} session, this one is bound to {actual}")]
    WrongKind { verb: &'static str, expected: InstrumentKind, actual: InstrumentKind },
    #[error("invalid argument: {0}")]
    Usage(String),
}

impl From<std::io::Error> for ClientError {
    fn from(e: std::io::Error) -> Self {
        match e.kind() {
            ErrorKind::WouldBlock | ErrorKind::TimedOut => ClientError::Timeout,
            ErrorKind::UnexpectedEof | ErrorKind::ConnectionReset | ErrorKind::ConnectionAborted | ErrorKind::BrokenPipe => {
                ClientError::Closed
            }
            _ => ClientError::Network(e),
        }
    }
}

/// Number text for the wire: shortest decimal that parses back to the same
/// `f64`. NR3 (9 digits) would lose precision that the steep part of the
/// transfer curve amplifies.
pub fn format_arg(v: f64) -> String {
    format!("{v}")
}

pub fn encode_set_voltage(channel: u8, volts: f64) -> String {
    format!("INST:NSEL {channel};:VOLT {}", format_arg(volts))
}

pub fn encode_set_current_limit(channel: u8, amps: f64) -> String {
    format!("INST:NSEL {channel};:CURR {}", format_arg(amps))
}

pub fn encode_set_output(channel: u8, on: bool) -> String {
    format!("INST:NSEL {channel};:OUTP {}", if on { "ON" } else { "OFF" })
}

pub const MEASURE_VOLTAGE: &str = "READ?";

/// One row of a `LIST` reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Listing {
    pub model: String,
    pub serial: String,
    pub kind: InstrumentKind,
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Connection {
    fn open(host: &str, port: u16, timeout: Duration) -> Result<Self, ClientError> {
        let addr = format!("{host}:{port}");
        let connect_err = |source| ClientError::Connect { addr: addr.clone(), source };
        let mut last = None;
        for sa in addr.to_socket_addrs().map_err(connect_err)? {
            match TcpStream::connect_timeout(&sa, timeout) {
                Ok(stream) => {
                    stream.set_read_timeout(Some(timeout))?;
                    stream.set_write_timeout(Some(timeout))?;
                    stream.set_nodelay(true)?;
                    let writer = stream.try_clone()?;
                    return Ok(Self { reader: BufReader::new(stream), writer });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(connect_err(last.unwrap_or_else(|| std::io::Error::new(ErrorKind::NotFound, "no address"))))
    }

    fn send(&mut self, line: &str) -> Result<(), ClientError> {
        if line.contains('\n') {
            return Err(ClientError::Usage("message must be a single line".into()));
        }
        let mut bytes = Vec::with_capacity(line.len() + 1);
        bytes.extend_from_slice(line.as_bytes());
        bytes.push(b'\n');
        self.writer.write_all(&bytes)?;
        Ok(())
    }

    fn recv(&mut self) -> Result<String, ClientError> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(ClientError::Closed);
        }
        if !line.ends_with('\n') {
            return Err(ClientError::Closed);
        }
        line.pop();
        if line.ends_with('\r') {
            line.pop();
        }
        Ok(line)
    }

    fn list(&mut self) -> Result<Vec<Listing>, ClientError> {
        self.send("LIST")?;
        let mut out = Vec::new();
        loop {
            let line = self.recv()?;
            if line == "OK" {
                return Ok(out);
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [model, serial, kind] = fields[..] else {
                return Err(ClientError::Protocol(line));
            };
            let kind = kind.parse().map_err(|_| ClientError::Protocol(line.clone()))?;
            out.push(Listing { model: model.into(), serial: serial.into(), kind });
        }
    }
}

/// Lists the instruments behind a bridge without binding to one.
pub fn list(host: &str, port: u16) -> Result<Vec<Listing>, ClientError> {
    Connection::open(host, port, DEFAULT_TIMEOUT)?.list()
}

/// A session bound to one instrument.
pub struct BridgeSession {
    conn: Connection,
    host: String,
    port: u16,
    instrument: InstrumentId,
    requests: u64,
}

impl BridgeSession {
    pub fn connect(host: &str, port: u16, selector: &str) -> Result<Self, ClientError> {
        Self::connect_with_timeout(host, port, selector, DEFAULT_TIMEOUT)
    }

    pub fn connect_with_timeout(host: &str, port: u16, selector: &str, timeout: Duration) -> Result<Self, ClientError> {
        let selector = selector.trim();
        if selector.is_empty() || selector.contains(char::is_whitespace) {
            return Err(ClientError::Usage(format!("bad instrument selector {selector:?}")));
        }
        let mut conn = Connection::open(host, port, timeout)?;
        // LIST first so the session knows its instrument's model and kind.
        let listing = conn.list()?;
        conn.send(&format!("CONNECT {selector}"))?;
        let reply = conn.recv()?;
        let serial = match reply.split_once(' ') {
            Some(("OK", serial)) => serial.to_string(),
            _ if reply.starts_with("ERR 404") => return Err(ClientError::NotFound(selector.into())),
            _ if reply.starts_with("ERR 409") => return Err(ClientError::Ambiguous(selector.into())),
            _ => return Err(ClientError::Protocol(reply)),
        };
        let entry = listing.into_iter().find(|l| l.serial == serial).ok_or_else(|| ClientError::Protocol(reply.clone()))?;
        Ok(Self {
            conn,
            host: host.to_string(),
            port,
            instrument: InstrumentId { model: entry.model, serial: entry.serial, kind: entry.kind },
            requests: 0,
        })
    }

    pub fn host(&self) -> &str {
        &self.host
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn instrument(&self) -> &InstrumentId {
        &self.instrument
    }

    /// Query-bearing messages sent and answered so far.
    pub fn requests(&self) -> u64 {
        self.requests
    }

    /// Sends a message expected to produce exactly one response line.
    pub fn query(&mut self, text: &str) -> Result<String, ClientError> {
        self.conn.send(text)?;
        let line = self.conn.recv()?;
        self.requests += 1;
        Ok(line)
    }

    /// Sends a message with any number of queries and collects one line per
    /// query. A message the parser rejects yields no lines.
    pub fn query_all(&mut self, text: &str) -> Result<Vec<String>, ClientError> {
        let expected = parse_message(text).map(|units| units.iter().filter(|u| u.is_query).count()).unwrap_or(0);
        self.conn.send(text)?;
        let lines = (0..expected).map(|_| self.conn.recv()).collect::<Result<Vec<_>, _>>()?;
        if expected > 0 {
            self.requests += 1;
        }
        Ok(lines)
    }

    /// Fire-and-forget; errors end up in the instrument's error queue.
    pub fn command(&mut self, text: &str) -> Result<(), ClientError> {
        self.conn.send(text)
    }

    fn require(&self, verb: &'static str, expected: InstrumentKind) -> Result<(), ClientError> {
        if self.instrument.kind != expected {
            return Err(ClientError::WrongKind { verb, expected, actual: self.instrument.kind });
        }
        Ok(())
    }

    fn check_channel(channel: u8) -> Result<(), ClientError> {
        if !(1..=labbench_core::config::CHANNEL_COUNT as u8).contains(&channel) {
            return Err(ClientError::Usage(format!("channel {channel} out of range")));
        }
        Ok(())
    }

    fn check_value(what: &str, v: f64) -> Result<(), ClientError> {
        if !v.is_finite() {
            return Err(ClientError::Usage(format!("{what} must be finite, got {v}")));
        }
        Ok(())
    }

    pub fn set_voltage(&mut self, channel: u8, volts: f64) -> Result<(), ClientError> {
        self.require("set_voltage", InstrumentKind::Psu)?;
        Self::check_channel(channel)?;
        Self::check_value("voltage", volts)?;
        self.command(&encode_set_voltage(channel, volts))
    }

    pub fn set_current_limit(&mut self, channel: u8, amps: f64) -> Result<(), ClientError> {
        self.require("set_current_limit", InstrumentKind::Psu)?;
        Self::check_channel(channel)?;
        Self::check_value("current", amps)?;
        self.command(&encode_set_current_limit(channel, amps))
    }

    pub fn set_output(&mut self, channel: u8, on: bool) -> Result<(), ClientError> {
        self.require("set_output", InstrumentKind::Psu)?;
        Self::check_channel(channel)?;
        self.command(&encode_set_output(channel, on))
    }

    pub fn measure_voltage(&mut self) -> Result<f64, ClientError> {
        self.require("measure_voltage", InstrumentKind::Dmm)?;
        let reply = self.query(MEASURE_VOLTAGE)?;
        parse_number(&reply).as_number().filter(|v| v.is_finite()).ok_or(ClientError::Protocol(reply))
    }

    /// Pops one entry off the instrument error queue as `(code, message)`.
    pub fn next_error(&mut self) -> Result<(i32, String), ClientError> {
        let reply = self.query("SYST:ERR?")?;
        let (code, msg) = reply.split_once(',').ok_or_else(|| ClientError::Protocol(reply.clone()))?;
        let code = code.trim().parse().map_err(|_| ClientError::Protocol(reply.clone()))?;
        Ok((code, msg.trim().trim_matches('"').to_string()))
    }
}

impl std::fmt::Debug for BridgeSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeSession")
            .field("host", &self.host)
            .field("port", &self.port)
            .field("instrument", &self.instrument)
            .field("requests", &self.requests)
            .finish()
    }
}
