use thiserror::Error;

/// Errors produced by the statistics, estimation and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("order {order} is invalid for n = {n} samples")]
    InvalidOrder { order: usize, n: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("order {order} needs at least {needed} samples, got {n}")]
    InsufficientSamples { order: usize, n: usize, needed: usize },

    #[error("degenerate variance estimate for order {order} at bandwidth {k}")]
    DegenerateVariance { order: usize, k: usize },

    #[error("off-band set is empty for bandwidth {k} with p = {p}")]
    EmptyHypothesisSet { k: usize, p: usize },

    #[error("invalid bandwidth {k} for dimension p = {p}")]
    InvalidBand { k: usize, p: usize },

    #[error("brute-force enumeration of {work} terms exceeds the oracle limit")]
    TooLargeForOracle { work: f64 },

    #[error("p-value {0} is outside [0, 1]")]
    InvalidPValue(f64),

    #[error("requested {requested} signal positions but only {available} are available")]
    InvalidSparsity { requested: usize, available: usize },

    #[error("bandwidth statistic undefined for order {order}: every variance estimate is degenerate")]
    BandwidthUndefined { order: usize },

    #[error("sample covariance is zero; trace ratio undefined")]
    ZeroCovariance,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("order {order} failed: {source}")]
    OrderFailed {
        order: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidOrder { .. } => "InvalidOrder",
            Error::InvalidData(_) => "InvalidData",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::DegenerateVariance { .. } => "DegenerateVariance",
            Error::EmptyHypothesisSet { .. } => "EmptyHypothesisSet",
            Error::InvalidBand { .. } => "InvalidBand",
            Error::TooLargeForOracle { .. } => "TooLargeForOracle",
            Error::InvalidPValue(_) => "InvalidPValue",
            Error::InvalidSparsity { .. } => "InvalidSparsity",
            Error::BandwidthUndefined { .. } => "BandwidthUndefined",
            Error::ZeroCovariance => "ZeroCovariance",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::OrderFailed { source, .. } => source.kind(),
            Error::Parse { .. } => "ParseError",
            Error::RaggedRow { .. } => "RaggedRow",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }

    /// True for failures caused by numerically degenerate inputs rather than bad data.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::DegenerateVariance { .. }
            | Error::BandwidthUndefined { .. }
            | Error::ZeroCovariance => true,
            Error::OrderFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
