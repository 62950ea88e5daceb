//! Program message parsing with SCPI-99 path retention.

use super::error::ScpiError;
use super::number::Arg;

/// Long forms known to the bench instruments. Tokens matching one of these
/// (short or long form, any case) are folded to the short form; other tokens
/// are kept uppercased and left for the instrument to reject.
pub const STANDARD_MNEMONICS: &[&str] = &[
    "SOURce",
    "VOLTage",
    "CURRent",
    "LEVel",
    "IMMediate",
    "AMPLitude",
    "OUTPut",
    "STATe",
    "INSTrument",
    "NSELect",
    "SYSTem",
    "ERRor",
    "NEXT",
    "VERSion",
    "MEASure",
    "CONFigure",
    "DC",
    "RANGe",
    "AUTO",
    "READ",
    "SENSe",
    "FUNCtion",
];

/// One command or query within a program message.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandUnit {
    /// Canonical (uppercase short form) mnemonics from the root.
    pub path: Vec<String>,
    /// `*`-prefixed IEEE 488.2 common command; `path` then holds one element.
    pub is_common: bool,
    pub is_query: bool,
    pub args: Vec<Arg>,
}

impl CommandUnit {
    /// True if the path equals `expected` (given as canonical short forms).
    pub fn path_is(&self, expected: &[&str]) -> bool {
        self.path.len() == expected.len() && self.path.iter().zip(expected).all(|(a, b)| a == b)
    }

    pub fn header(&self) -> String {
        let mut h = if self.is_common { format!("*{}", self.path[0]) } else { format!(":{}", self.path.join(":")) };
        if self.is_query {
            h.push('?');
        }
        h
    }
}

/// Short form of a long-form mnemonic: its uppercase prefix.
pub fn short_form(long_form: &str) -> &str {
    let end = long_form.find(|c: char| c.is_ascii_lowercase()).unwrap_or(long_form.len());
    &long_form[..end]
}

/// Case-insensitive match against either the short or the full long form.
pub fn mnemonic_matches(token: &str, long_form: &str) -> bool {
    token.eq_ignore_ascii_case(short_form(long_form)) || token.eq_ignore_ascii_case(long_form)
}

#[derive(Debug, Clone)]
pub struct Parser {
    vocabulary: Vec<&'static str>,
}

impl Default for Parser {
    fn default() -> Self {
        Self::new(STANDARD_MNEMONICS)
    }
}

impl Parser {
    pub fn new(vocabulary: &[&'static str]) -> Self {
        Self { vocabulary: vocabulary.to_vec() }
    }

    fn canonical(&self, token: &str) -> String {
        self.vocabulary
            .iter()
            .find(|long| mnemonic_matches(token, long))
            .map(|long| short_form(long).to_string())
            .unwrap_or_else(|| token.to_ascii_uppercase())
    }

    /// Splits a newline-stripped program message into command units.
    ///
    /// A unit starting with `:` resolves from the root, a common command
    /// leaves the current path untouched, and any other unit resolves
    /// relative to the parent of the previous unit's final node.
    pub fn parse_message(&self, line: &str) -> Result<Vec<CommandUnit>, ScpiError> {
        let mut units = Vec::new();
        let mut prefix: Vec<String> = Vec::new();
        for raw in line.split(';') {
            let unit = raw.trim();
            if unit.is_empty() {
                return Err(ScpiError::SYNTAX);
            }
            let (header, params) = match unit.find(|c: char| c.is_ascii_whitespace()) {
                Some(i) => (&unit[..i], unit[i..].trim()),
                None => (unit, ""),
            };
            let args = parse_args(params)?;
            let (header, is_query) = match header.strip_suffix('?') {
                Some(h) => (h, true),
                None => (header, false),
            };

            if let Some(name) = header.strip_prefix('*') {
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphabetic()) {
                    return Err(ScpiError::SYNTAX);
                }
                units.push(CommandUnit {
                    path: vec![name.to_ascii_uppercase()],
                    is_common: true,
                    is_query,
                    args,
                });
                continue;
            }

            let (relative, absolute) = match header.strip_prefix(':') {
                Some(rest) => (rest, true),
                None => (header, false),
            };
            let mut path = if absolute { Vec::new() } else { prefix.clone() };
            for token in relative.split(':') {
                if !is_mnemonic(token) {
                    return Err(ScpiError::SYNTAX);
                }
                path.push(self.canonical(token));
            }
            prefix = path[..path.len() - 1].to_vec();
            units.push(CommandUnit { path, is_common: false, is_query, args });
        }
        Ok(units)
    }
}

fn is_mnemonic(token: &str) -> bool {
    let mut chars = token.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_args(params: &str) -> Result<Vec<Arg>, ScpiError> {
    if params.is_empty() {
        return Ok(Vec::new());
    }
    let mut args = Vec::new();
    for piece in params.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            return Err(ScpiError::SYNTAX);
        }
        args.extend(piece.split_ascii_whitespace().map(Arg::parse));
    }
    Ok(args)
}

/// Parses with the standard bench vocabulary.
pub fn parse_message(line: &str) -> Result<Vec<CommandUnit>, ScpiError> {
    Parser::default().parse_message(line)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paths(line: &str) -> Vec<Vec<String>> {
        parse_message(line).unwrap().into_iter().map(|u| u.path).collect()
    }

    #[test]
    fn common_query() {
        let units = parse_message("*IDN?").unwrap();
        assert_eq!(units.len(), 1);
        assert!(units[0].is_common && units[0].is_query);
        assert_eq!(units[0].path, ["IDN"]);
        assert!(units[0].args.is_empty());
    }

    #[test]
    fn long_form_folding() {
        let units = parse_message(":VOLTage 3.0").unwrap();
        assert_eq!(units[0].path, ["VOLT"]);
        assert_eq!(units[0].args, [Arg::Number(3.0)]);
    }

    #[test]
    fn path_retention() {
        assert_eq!(paths("VOLT 2.5;CURR 0.1"), [vec!["VOLT"], vec!["CURR"]]);
        assert_eq!(paths("MEAS:VOLT:DC?"), [vec!["MEAS", "VOLT", "DC"]]);
        assert_eq!(paths("SYST:ERR?;VERS?"), [vec!["SYST", "ERR"], vec!["SYST", "VERS"]]);
        assert_eq!(paths("INST:NSEL 2;*OPC?;NSEL?")[2], ["INST", "NSEL"]);
        assert_eq!(paths("INST:NSEL 2;:VOLT 1"), [vec!["INST", "NSEL"], vec!["VOLT"]]);
    }

    #[test]
    fn short_long_helpers() {
        assert!(mnemonic_matches("VOLT", "VOLTage"));
        assert!(mnemonic_matches("voltage", "VOLTage"));
        assert!(!mnemonic_matches("VOLTS", "VOLTage"));
        assert!(!mnemonic_matches("VOL", "VOLTage"));
        assert_eq!(short_form("NSELect"), "NSEL");
        assert_eq!(short_form("DC"), "DC");
    }

    #[test]
    fn syntax_errors() {
        for bad in ["", ";", "VOLT 1;", "VOLT::CURR", ":", "*", "*I?D", "VO-LT 1", "VOLT 1,,2", "1VOLT", "VOLT??"] {
            assert_eq!(parse_message(bad), Err(ScpiError::SYNTAX), "{bad:?}");
        }
    }

    #[test]
    fn unknown_headers_pass_through_uppercased() {
        assert_eq!(paths("volts 1"), [vec!["VOLTS"]]);
    }

    #[test]
    fn every_vocabulary_entry_folds_identically() {
        for long in STANDARD_MNEMONICS {
            let short = short_form(long);
            let a = paths(&format!("SYST:{long} 1"));
            let b = paths(&format!("SYST:{short} 1"));
            let c = paths(&format!("syst:{} 1", long.to_lowercase()));
            assert_eq!(a, b);
            assert_eq!(a, c);
        }
    }

    proptest! {
        #[test]
        fn chaining_equivalence(i in 0usize..STANDARD_MNEMONICS.len(), j in 0usize..STANDARD_MNEMONICS.len(), k in 0usize..STANDARD_MNEMONICS.len()) {
            let (a, b, c) = (STANDARD_MNEMONICS[i], STANDARD_MNEMONICS[j], STANDARD_MNEMONICS[k]);
            prop_assert_eq!(
                parse_message(&format!("{a}:{b} 1;{c} 2")),
                parse_message(&format!("{a}:{b} 1;:{a}:{c} 2"))
            );
        }

        #[test]
        fn parser_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let line = String::from_utf8_lossy(&bytes);
            let _ = parse_message(&line);
        }
    }
}
