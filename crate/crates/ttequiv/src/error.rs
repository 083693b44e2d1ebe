use thiserror::Error;

/// Errors raised by parsing, construction and the decision procedures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown symbol `{name}` at {pos}")]
    UnknownSymbol { name: String, pos: usize },
    #[error("symbol `{name}` at {pos} has rank {expected} but {found} children were given")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        pos: usize,
    },
    #[error("invalid path {0}")]
    InvalidPath(String),
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("substitution error: {0}")]
    Substitution(String),
    #[error("reserved name `{0}`")]
    Reserved(String),
    #[error("malformed transducer: {0}")]
    Malformed(String),
    #[error("transducer is not a DTOP (state `{0}` has parameters)")]
    NotDtop(String),
    #[error("transducer is not total: {0}")]
    NotTotal(String),
    #[error("not monadic: {0}")]
    NotMonadic(String),
    #[error("input is not in the transducer's domain")]
    NotInDomain,
    #[error("not finite-copying: {0}")]
    NotFiniteCopying(String),
    #[error("nondeterministic: {0}")]
    Nondeterministic(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("resource budget exceeded: {0}")]
    Budget(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
