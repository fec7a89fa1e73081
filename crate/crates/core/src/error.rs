use std::path::PathBuf;

use thiserror::Error;

use crate::series::Month;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series `{series}` has a gap: {missing} is missing")]
    Gap { series: String, missing: Month },

    #[error("cannot parse row {row}, column `{column}`: {reason}")]
    Parse {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("duplicate date {date} at row {row}")]
    DuplicateDate { row: usize, date: Month },

    #[error("rows out of order at row {row}: {date} follows {previous}")]
    OutOfOrder {
        row: usize,
        date: Month,
        previous: Month,
    },

    #[error("series `{id}` does not cover {required}")]
    Coverage { id: String, required: String },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("insufficient context: need at least {required} values, got {actual}")]
    InsufficientContext { required: usize, actual: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("quantile error: {0}")]
    Quantile(String),

    #[error("adapter timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error("protocol error: {reason} (frame: {frame})")]
    Protocol { frame: String, reason: String },

    #[error("remote error [{code}]: {message}")]
    Remote { code: String, message: String },

    #[error("prompt error: {0}")]
    Prompt(String),

    #[error("no <forecast> block in response")]
    MissingBlock,

    #[error("forecast dates do not match: expected {expected:?}, got {got:?}")]
    DateMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },

    #[error("cannot parse forecast value on line `{0}`")]
    ValueParse(String),

    #[error("provider error: {message}{}", transcript.as_ref().map(|p| format!(" (transcript: {})", p.display())).unwrap_or_default())]
    Provider {
        message: String,
        transcript: Option<PathBuf>,
    },

    #[error("no rating found for variable `{0}`")]
    RatingMissing(String),

    #[error("rating {score} for `{variable}` is outside 1..=9")]
    RatingRange { variable: String, score: i64 },

    #[error("rating sheets cover different variable sets: {0}")]
    SheetMismatch(String),

    #[error("actual value at index {index} is zero")]
    ZeroDenominator { index: usize },

    #[error("missing state: {0}")]
    State(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn coverage(id: impl Into<String>, from: Month, to: Month) -> Self {
        Error::Coverage {
            id: id.into(),
            required: format!("{from}..={to}"),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by invalid user-provided inputs, as opposed to
    /// runtime failures of a model or provider.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Gap { .. }
                | Error::Parse { .. }
                | Error::DuplicateDate { .. }
                | Error::OutOfOrder { .. }
                | Error::Coverage { .. }
                | Error::Manifest(_)
                | Error::Input(_)
                | Error::Config(_)
                | Error::Prompt(_)
        )
    }
}
