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

    #[error("JSON error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error in {context}: {message}")]
    Csv { context: String, message: String },

    #[error("MPS parse error at line {line}: {message}")]
    Mps { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("system failed validation with {} violation(s); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<crate::model::Violation>),

    #[error("missing cost parameter `{parameter}` for expandable technology `{technology}`")]
    MissingCost {
        technology: String,
        parameter: &'static str,
    },

    #[error("missing inflow series for `{technology}` in country `{country}`")]
    MissingInflow { country: String, technology: String },

    #[error("missing capacity entry for `{technology}` in country `{country}`")]
    MissingCapacity { country: String, technology: String },

    #[error("unknown country `{0}`")]
    UnknownCountry(String),

    #[error("cannot parse factor state `{0}`")]
    BadState(String),

    #[error("missing reference shares for harmonized factor `{0}`")]
    MissingShares(String),

    #[error("metric table is missing state {0}")]
    MissingState(String),

    #[error("solve of {context} ended with status {status}")]
    SolveFailed { context: String, status: String },

    #[error("manifest hash mismatch: ledger has {ledger}, manifest has {manifest}")]
    ManifestMismatch { ledger: String, manifest: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn csv(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Csv {
            context: context.into(),
            message: message.to_string(),
        }
    }
}
