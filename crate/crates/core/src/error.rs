use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver framework.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// An objective evaluated to NaN or infinity.
    #[error("evaluation error in problem `{problem}`: non-finite objective at continuous={continuous:?} integer={integer:?}")]
    NonFinite {
        problem: String,
        continuous: Vec<f64>,
        integer: Vec<i64>,
    },

    /// The requested enumeration exceeds the configured budget.
    #[error("capacity error: enumeration needs {required} evaluations, budget is {budget}")]
    Capacity { required: u128, budget: u64 },

    /// Every repetition of an experiment failed.
    #[error("no successful runs to summarize")]
    EmptySummary,

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("JSON error at {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
