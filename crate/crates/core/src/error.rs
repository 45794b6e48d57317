use std::fmt;

use thiserror::Error;

/// Which subset size request could not be satisfied by a truncated dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubsetRequest {
    TopK(usize),
    TopP(f64),
}

impl fmt::Display for SubsetRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubsetRequest::TopK(k) => write!(f, "k={k}"),
            SubsetRequest::TopP(p) => write!(f, "p={p}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("total probability mass {total} is outside [1-1e-6, 1+1e-6]")]
    Mass { total: f64 },

    #[error("{what} = {value} is out of range")]
    Range { what: &'static str, value: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dump lists {listed} tokens with cumulative mass {listed_mass}; cannot satisfy {request}, re-dump with a larger top-M")]
    Truncation {
        request: SubsetRequest,
        listed: usize,
        listed_mass: f64,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },

    #[error("distribution has no listed entries")]
    Empty,

    #[error("{0} certainty partition is empty")]
    EmptyPartition(&'static str),

    #[error("records and measure vectors disagree: {0}")]
    KeyMismatch(String),

    #[error("label space mismatch: {0}")]
    LabelSpace(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
