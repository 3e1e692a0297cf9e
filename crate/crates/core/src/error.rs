use thiserror::Error;

use crate::omp::IterationRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: wrong shape, non-finite entry, out-of-range parameter.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A formula was evaluated outside the range where it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A column subset is numerically rank deficient. `partial_trace` holds the
    /// iterations completed before the failure when raised from the solver.
    #[error("column subset {subset:?} is rank deficient")]
    Degenerate {
        subset: Vec<usize>,
        partial_trace: Vec<IterationRecord>,
    },

    #[error("{count} column subsets exceed the enumeration cap of {cap}")]
    Capacity { count: u128, cap: u128 },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    /// A sweep trial failed; the sweep stops at the first failing index.
    #[error("trial {index}: {source}")]
    Trial { index: usize, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// The underlying error with any trial wrapper removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Trial { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn degenerate(subset: &[usize]) -> Self {
        Error::Degenerate {
            subset: subset.to_vec(),
            partial_trace: Vec::new(),
        }
    }
}
