use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid of {requested} nodes exceeds the node budget of {budget}; try dr >= {suggested_dr:.3e}")]
    NodeBudget {
        requested: usize,
        budget: usize,
        suggested_dr: f64,
    },

    #[error("profile has {found} samples but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value at t = {t} (node {node})")]
    NonFinite { t: f64, node: usize },

    #[error("unknown initial profile `{0}` (expected bump, cone or plateau)")]
    UnknownProfile(String),

    #[error("time {t0} lies outside the trace [{start}, {end}]")]
    OutsideTrace { t0: f64, start: f64, end: f64 },

    #[error("{law} fit needs at least {needed} blown-up records, got {found}")]
    InsufficientData {
        law: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("subcritical fit requires p < 1 + 2/n = {critical}, got p = {p}")]
    NotSubcritical { p: f64, critical: f64 },

    #[error("{context}: {source}")]
    Io {
        context: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            context: path.into(),
            source,
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}
