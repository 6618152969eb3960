use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("dates not strictly increasing: {previous} followed by {next}")]
    NonIncreasingDates { previous: String, next: String },

    #[error("missing price for ticker {ticker} on {date}")]
    MissingValue { ticker: String, date: String },

    #[error("non-positive price {value} for ticker {ticker} on {date}")]
    NonPositivePrice {
        ticker: String,
        date: String,
        value: f64,
    },

    #[error("ticker {ticker} has {count} observation(s), need at least 2")]
    InsufficientObservations { ticker: String, count: usize },

    #[error("duplicate ticker {0}")]
    DuplicateTicker(String),

    #[error("unknown ticker {0}")]
    UnknownTicker(String),

    #[error("sector nesting violation: {level} {label:?} appears under {parent_level} {first:?} and {second:?}")]
    NestingViolation {
        level: &'static str,
        label: String,
        parent_level: &'static str,
        first: String,
        second: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate regression: market index has zero variance over the window")]
    DegenerateRegression,

    #[error("asset {asset} has zero variance over the window")]
    ZeroVariance { asset: String },

    #[error("ticker sets differ: {0}")]
    TickerMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("need at least {required} assets, got {actual}")]
    TooFewAssets { required: usize, actual: usize },

    #[error("graph is not maximal planar: {0}")]
    NotMaximalPlanar(String),

    #[error("bubble tree invariant violated: {0}")]
    BubbleTree(String),

    #[error("window {index}: {source}")]
    Window {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
