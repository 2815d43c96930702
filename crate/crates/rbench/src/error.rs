//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("clock went backwards at read pair {pair_index}: {earlier_ns} ns was followed by {later_ns} ns")]
    NonMonotonicClock {
        pair_index: usize,
        earlier_ns: u64,
        later_ns: u64,
    },

    #[error("clock never advanced over {samples} read pairs; increase the sample count or use a finer clock")]
    ClockNeverAdvanced { samples: usize },

    #[error("configured timer accuracy {acc_ns} ns is below the measured precision {prec_ns} ns")]
    AccuracyBelowPrecision { acc_ns: u64, prec_ns: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("lookup table is empty")]
    EmptyLookupTable,

    #[error("empty sample set")]
    EmptySamples,

    #[error("invalid sample {0}: samples must be finite and non-negative")]
    InvalidSample(f64),

    #[error("baseline minimum {0} ns is not positive")]
    NonPositiveBaseline(f64),

    #[error("benchmark executor failed: {0}")]
    Executor(String),

    #[error("degenerate benchmark: every ramp measurement was zero, the workload is below timer precision even at the largest repetition count")]
    DegenerateBenchmark,

    #[error("budget {budget_ns} ns is too small for a single measurement; at least {required_ns} ns is needed")]
    BudgetTooSmall { budget_ns: u64, required_ns: u64 },

    #[error("report record {id} stores estimates that do not match its raw measurements")]
    ReportInconsistent { id: String },

    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
