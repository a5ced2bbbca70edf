use std::fmt;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied parameter is out of range or inconsistent.
    InvalidParameter(String),
    /// A profile or metric field violates its structural invariants.
    InvalidProfile(String),
    /// A constructor could not produce an admissible geometry.
    Construction(String),
    /// The profile degenerates in the interior (fiber radius collapses).
    SingularProfile(String),
    /// Two fields that must share a grid do not.
    GridMismatch(String),
    /// The numerical scheme failed (NaN, rejected step, divergence).
    Numeric(String),
    /// A serialized artifact could not be parsed.
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::InvalidProfile(msg) => write!(f, "invalid profile: {msg}"),
            Error::Construction(msg) => write!(f, "construction failed: {msg}"),
            Error::SingularProfile(msg) => write!(f, "singular profile: {msg}"),
            Error::GridMismatch(msg) => write!(f, "grid mismatch: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
