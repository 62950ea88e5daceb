//! Numeric program data (NR1/NR2/NR3) and response formatting.

use super::parser::mnemonic_matches;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Min,
    Max,
    On,
    Off,
}

/// One parsed program-data argument.
#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Number(f64),
    Keyword(Keyword),
    /// Anything else, kept verbatim for the consumer to interpret.
    Token(String),
}

impl Arg {
    /// Classifies a raw argument token, recognising ON/OFF in addition to
    /// everything [`parse_number`] accepts.
    pub fn parse(token: &str) -> Self {
        if token.eq_ignore_ascii_case("ON") {
            Arg::Keyword(Keyword::On)
        } else if token.eq_ignore_ascii_case("OFF") {
            Arg::Keyword(Keyword::Off)
        } else {
            parse_number(token)
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Arg::Number(v) => Some(*v),
            _ => None,
        }
    }
}

/// Parses integer, decimal and exponent forms, plus MIN/MAX in short or long
/// form. Anything unrecognised falls through as [`Arg::Token`].
pub fn parse_number(token: &str) -> Arg {
    if mnemonic_matches(token, "MINimum") {
        return Arg::Keyword(Keyword::Min);
    }
    if mnemonic_matches(token, "MAXimum") {
        return Arg::Keyword(Keyword::Max);
    }
    if is_decimal_numeric(token) {
        if let Ok(v) = token.parse::<f64>() {
            if v.is_finite() {
                return Arg::Number(v);
            }
        }
    }
    Arg::Token(token.to_string())
}

/// `[+-] digits [. digits] [(e|E) [+-] digits]`, with at least one mantissa
/// digit on either side of the point. Rejects "inf"/"nan" that `f64::from_str`
/// would otherwise accept.
fn is_decimal_numeric(token: &str) -> bool {
    let b = token.as_bytes();
    let mut i = 0;
    let digits = |i: &mut usize| {
        let start = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        *i - start
    };
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let mut mantissa = digits(&mut i);
    if i < b.len() && b[i] == b'.' {
        i += 1;
        mantissa += digits(&mut i);
    }
    if mantissa == 0 {
        return false;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        if digits(&mut i) == 0 {
            return false;
        }
    }
    i == b.len()
}

/// Formats a query response in NR3 with nine significant digits, e.g.
/// `3.00000000E+00`.
pub fn format_nr3(value: f64) -> String {
    let value = if value == 0.0 { 0.0 } else { value };
    let raw = format!("{value:.8E}");
    let (mantissa, exponent) = raw.split_once('E').expect("exponent present");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let sign = if exponent < 0 { '-' } else { '+' };
    format!("{mantissa}E{sign}{:02}", exponent.abs())
}
