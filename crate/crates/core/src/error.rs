use serde::Serialize;
use thiserror::Error;

use crate::types::Convention;

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum Error {
    #[error("domain error: {what}")]
    Domain { what: String },

    #[error("ordering violated for {convention:?} convention: {detail}")]
    Ordering {
        convention: Convention,
        detail: String,
    },

    /// No admissible integer parameter. `window` holds the open real
    /// interval and `admissible` the integers inside it (may be empty).
    #[error("parameter {param}={value} outside window ({lo}, {hi}); admissible: {admissible:?}")]
    Feasibility {
        param: String,
        value: i64,
        lo: f64,
        hi: f64,
        admissible: Vec<i64>,
    },

    #[error("decomposition not valid: {what}")]
    Validity { what: String },

    #[error("demand infeasible: {what}")]
    Infeasible { what: String },

    #[error("no placement satisfies the neutralization constraints; cases: {cases:?}")]
    Placement { cases: Vec<String> },

    #[error("invalid configuration: {what}")]
    Config { what: String },

    #[error("internal invariant broken: {what}")]
    Internal { what: String },
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::Ordering { .. } => "ordering",
            Error::Feasibility { .. } => "feasibility",
            Error::Validity { .. } => "validity",
            Error::Infeasible { .. } => "infeasible",
            Error::Placement { .. } => "placement",
            Error::Config { .. } => "config",
            Error::Internal { .. } => "internal",
        }
    }

    pub(crate) fn domain(what: impl Into<String>) -> Self {
        Error::Domain { what: what.into() }
    }

    pub(crate) fn config(what: impl Into<String>) -> Self {
        Error::Config { what: what.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
