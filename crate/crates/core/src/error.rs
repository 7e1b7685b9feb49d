use std::fmt;

use thiserror::Error;

/// Position inside DSL text, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unknown program `{0}`")]
    UnknownProgram(String),

    #[error("invalid parameter for {program}: {reason}")]
    InvalidParameter { program: String, reason: String },

    #[error("syntax error at {location}: {message}")]
    Syntax { location: Location, message: String },

    #[error("invalid program: {}", .0.join("; "))]
    InvalidProgram(Vec<String>),

    #[error("start value must be a positive integer")]
    NonPositive,

    #[error("not a cycle: {0}")]
    NotACycle(String),

    #[error("trajectory did not converge: {0}")]
    NotConverged(String),

    #[error("no value found below search bound {bound}")]
    NotFound { bound: String },

    #[error("{0}")]
    Model(String),

    #[error("invalid range: {0}")]
    InvalidRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;
