//! SCPI program message parsing and response formatting.
//!
//! The parser is instrument-agnostic: it checks syntax and folds known
//! mnemonics to their short form, but whether a header exists is decided by
//! the instrument that executes it.

mod error;
mod number;
mod parser;

pub use error::{ErrorQueue, ScpiError, ERROR_QUEUE_CAPACITY};
pub use number::{format_nr3, parse_number, Arg, Keyword};
pub use parser::{mnemonic_matches, parse_message, short_form, CommandUnit, Parser, STANDARD_MNEMONICS};
