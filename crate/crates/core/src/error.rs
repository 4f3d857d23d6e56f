use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("matrix is rank deficient (sigma_min = {sigma_min:e}){}", block.map(|b| format!(" in block {b}")).unwrap_or_default())]
    Singular { sigma_min: f64, block: Option<usize> },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("recovery error: {0}")]
    Recovery(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("reward model error: {0}")]
    Mode(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by user input or configuration rather than
    /// numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Parameter(_)
                | Error::Config(_)
                | Error::Parse { .. }
                | Error::Mode(_)
                | Error::Capability(_)
                | Error::Io(_)
                | Error::Dimension(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
