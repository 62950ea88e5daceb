use std::collections::VecDeque;
use std::fmt;

/// Capacity of an instrument error queue.
pub const ERROR_QUEUE_CAPACITY: usize = 16;

/// A SCPI error/event entry as reported by `SYST:ERR?`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScpiError {
    pub code: i32,
    pub message: &'static str,
}

impl ScpiError {
    pub const NO_ERROR: Self = Self { code: 0, message: "No error" };
    pub const SYNTAX: Self = Self { code: -102, message: "Syntax error" };
    pub const MISSING_PARAMETER: Self = Self { code: -109, message: "Missing parameter" };
    pub const UNDEFINED_HEADER: Self = Self { code: -113, message: "Undefined header" };
    pub const DATA_OUT_OF_RANGE: Self = Self { code: -222, message: "Data out of range" };
    pub const QUEUE_OVERFLOW: Self = Self { code: -350, message: "Queue overflow" };

    /// Response text for `SYST:ERR?`, e.g. `-222,"Data out of range"`.
    pub fn to_response(&self) -> String {
        format!("{},\"{}\"", self.code, self.message)
    }
}

impl fmt::Display for ScpiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.code, self.message)
    }
}

impl std::error::Error for ScpiError {}

/// Bounded FIFO of pending errors. When full, the newest slot is replaced by
/// a queue-overflow marker and further errors are dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ErrorQueue {
    entries: VecDeque<ScpiError>,
}

impl ErrorQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, err: ScpiError) {
        if self.entries.len() < ERROR_QUEUE_CAPACITY {
            self.entries.push_back(err);
        } else if let Some(last) = self.entries.back_mut() {
            *last = ScpiError::QUEUE_OVERFLOW;
        }
    }

    /// Removes the oldest entry; an empty queue reports "No error".
    pub fn pop(&mut self) -> ScpiError {
        self.entries.pop_front().unwrap_or(ScpiError::NO_ERROR)
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_queue_reports_no_error() {
        let mut q = ErrorQueue::new();
        assert_eq!(q.pop().to_response(), "0,\"No error\"");
    }

    #[test]
    fn fifo_drain() {
        let mut q = ErrorQueue::new();
        q.push(ScpiError::DATA_OUT_OF_RANGE);
        q.push(ScpiError::UNDEFINED_HEADER);
        assert_eq!(q.pop(), ScpiError::DATA_OUT_OF_RANGE);
        assert_eq!(q.pop(), ScpiError::UNDEFINED_HEADER);
        assert_eq!(q.pop(), ScpiError::NO_ERROR);
    }

    #[test]
    fn overflow_keeps_oldest_fifteen_and_marker() {
        let mut q = ErrorQueue::new();
        for i in 0..17 {
            q.push(if i % 2 == 0 { ScpiError::SYNTAX } else { ScpiError::MISSING_PARAMETER });
        }
        assert_eq!(q.len(), ERROR_QUEUE_CAPACITY);
        for i in 0..15 {
            let expected = if i % 2 == 0 { ScpiError::SYNTAX } else { ScpiError::MISSING_PARAMETER };
            assert_eq!(q.pop(), expected);
        }
        assert_eq!(q.pop(), ScpiError::QUEUE_OVERFLOW);
        assert_eq!(q.pop(), ScpiError::NO_ERROR);
    }

    #[test]
    fn exactly_full_has_no_marker() {
        let mut q = ErrorQueue::new();
        for _ in 0..16 {
            q.push(ScpiError::SYNTAX);
        }
        assert!((0..16).all(|_| q.pop() == ScpiError::SYNTAX));
    }
}
