use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: {1}")]
    InvalidDimension(usize, &'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("law built for n = {law} applied to a network with n = {network}")]
    DimensionMismatch { law: usize, network: usize },

    #[error("column {column} has zero variance; correlation is undefined")]
    UndefinedCorrelation { column: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at row {row}, column {col}: {value:?}")]
    Parse {
        row: usize,
        col: usize,
        value: String,
    },

    #[error("no data left: {0}")]
    EmptyData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the data handed to the library rather than by the
    /// numerics. The CLI maps these to a distinct exit code.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}
