use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("csv read error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("response column '{0}' not found in header")]
    ResponseColumnMissing(String),
    #[error("missing response value in data row {row} (1-based, excluding header)")]
    MissingResponse { row: usize },
    #[error("could not parse '{value}' as a number at data row {row}, column '{column}'")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("column '{0}' has no observed values")]
    AllMissingColumn(String),
    #[error("empty dataset: no data rows")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("amputation produced an all-missing column '{0}' twice; lower the rate")]
    DegenerateAmputation(String),
    #[error("missing-rate calibration failed for column '{0}'")]
    RateCalibration(String),
    #[error("no complete cases remain after dropping rows with missing covariates")]
    NoCompleteCases,
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
