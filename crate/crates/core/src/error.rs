use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument `{name}` out of domain: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("grid dimension mismatch: expected {expected:?}, found {found:?}")]
    DimMismatch { expected: Vec<usize>, found: Vec<usize> },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },

    #[error("series of length {len} too short for {params} parameters")]
    TooShort { len: usize, params: usize },

    #[error("AR coefficients {0:?} are not stationary")]
    NonStationary(Vec<f64>),

    #[error("missing fit for in-mask site {0}")]
    MissingFit(usize),

    #[error("unsupported AR table entry: order {order}, shape {shape}")]
    UnsupportedAr { order: usize, shape: String },

    #[error("phantom: {0}")]
    Phantom(String),

    #[error("activation maps cover different site sets ({left} vs {right})")]
    SiteMismatch { left: usize, right: usize },

    #[error("previous threshold required for iteration {0}")]
    MissingPreviousThreshold(usize),

    #[error("experiment cell {cell} replicate {replicate} failed: {source}")]
    Cell {
        cell: String,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Domain { name, reason: reason.into() }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
