//! Sweep results as `vbias,vin,vout` CSV.
//!
//! Numbers are written in scientific notation with ten significant digits
//! and a lowercase `e` (`3.000000000e0`), independent of platform and
//! locale, so identical runs produce identical bytes.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;

pub const CSV_HEADER: [&str; 3] = ["vbias", "vin", "vout"];

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("rows out of order at line {line}: records must be sorted by (vbias, vin)")]
    Unsorted { line: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Row<T> {
    pub vbias: T,
    pub vin: T,
    pub vout: T,
}

/// One experiment run: rows sorted by `(vbias, vin)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecord<T> {
    pub rows: Vec<Row<T>>,
}

/// A single transfer curve extracted from a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve<T> {
    pub vbias: T,
    /// `(vin, vout)` sorted by `vin`.
    pub points: Vec<(T, T)>,
}

/// Ten significant digits, lowercase exponent, no exponent padding.
pub fn format_value<T: Scalar>(v: T) -> String {
    let v = if v == T::zero() { T::zero() } else { v };
    format!("{v:.9e}")
}

impl<T: Scalar> RunRecord<T> {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    pub fn push_curve(&mut self, vbias: T, points: &[(T, T)]) {
        self.rows.extend(points.iter().map(|&(vin, vout)| Row { vbias, vin, vout }));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Splits into consecutive blocks of equal `vbias`.
    pub fn curves(&self) -> Vec<Curve<T>> {
        let mut curves: Vec<Curve<T>> = Vec::new();
        for row in &self.rows {
            match curves.last_mut() {
                Some(c) if c.vbias == row.vbias => c.points.push((row.vin, row.vout)),
                _ => curves.push(Curve { vbias: row.vbias, points: vec![(row.vin, row.vout)] }),
            }
        }
        curves
    }

    /// Index of the first row that breaks `(vbias, vin)` ordering.
    pub fn first_unsorted(&self) -> Option<usize> {
        self.rows
            .windows(2)
            .position(|w| !(w[1].vbias > w[0].vbias || (w[1].vbias == w[0].vbias && w[1].vin > w[0].vin)))
            .map(|i| i + 1)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), RecordError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let io = |e: csv::Error| RecordError::Io(e.into());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            w.write_record([format_value(r.vbias), format_value(r.vin), format_value(r.vout)]).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, RecordError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
        let mut rows = Vec::new();
        let mut saw_header = false;
        for result in reader.records() {
            let record = result.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                RecordError::Malformed { line, reason: e.to_string() }
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if !saw_header {
                if record.iter().collect::<Vec<_>>() != CSV_HEADER {
                    return Err(RecordError::Malformed { line, reason: format!("expected header {}", CSV_HEADER.join(",")) });
                }
                saw_header = true;
                continue;
            }
            if record.len() != 3 {
                return Err(RecordError::Malformed { line, reason: format!("expected 3 fields, found {}", record.len()) });
            }
            let field = |i: usize| -> Result<T, RecordError> {
                let text = record[i].trim();
                match text.parse::<T>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(RecordError::Malformed { line, reason: format!("bad {} value {text:?}", CSV_HEADER[i]) }),
                }
            };
            rows.push(Row { vbias: field(0)?, vin: field(1)?, vout: field(2)? });
        }
        if !saw_header {
            return Err(RecordError::Malformed { line: 1, reason: "empty file".into() });
        }
        let rec = Self { rows };
        if let Some(i) = rec.first_unsorted() {
            return Err(RecordError::Unsorted { line: i as u64 + 2 });
        }
        Ok(rec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RecordError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RecordError> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
