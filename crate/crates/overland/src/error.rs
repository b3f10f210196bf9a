use std::fmt;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error(transparent)]
    Numerical(#[from] NumericalError),
}

impl Error {
    pub(crate) fn io(path: impl fmt::Display, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_string(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// True for solver aborts (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericalErrorKind {
    NegativeDepth,
    NotFinite,
    TimeStepTooSmall,
}

impl fmt::Display for NumericalErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NumericalErrorKind::NegativeDepth => "negative water depth",
            NumericalErrorKind::NotFinite => "non-finite value",
            NumericalErrorKind::TimeStepTooSmall => "time step below dt_min",
        })
    }
}

/// Solver abort with enough context to locate the failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind} at step {step}, t = {time} s, cell (row {row}, col {col}): value {value:e}")]
pub struct NumericalError {
    pub kind: NumericalErrorKind,
    pub step: u64,
    pub time: f64,
    /// Raster row (0 = north) of the offending cell.
    pub row: usize,
    pub col: usize,
    pub value: f64,
}
