use std::io;

use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("empty KG")]
    EmptyKg,

    #[error("{kind} id {id} out of range (size {size})")]
    OutOfRange { kind: &'static str, id: usize, size: usize },

    #[error("unknown {kind} label {label:?}")]
    UnknownLabel { kind: &'static str, label: String },

    #[error("no triple ({head}, {relation}, {tail}) in the KG")]
    NotATriple { head: u32, relation: u32, tail: u32 },

    #[error("query stamped {found}, expected {expected}")]
    Timestamp { expected: u64, found: u64 },

    #[error("query has no answers")]
    NoAnswers,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("series divergent")]
    Divergent,

    #[error("index out of sync: entry {0} not found")]
    IndexDesync(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no entity can serve as a query head")]
    NoHeads,

    #[error("zero personalization vector")]
    ZeroPersonalization,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
