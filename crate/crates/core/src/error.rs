use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violates a documented invariant. `field` names
    /// the offending key, e.g. `miners` or `protocol_params.ratio`.
    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag, used by the CLI on stderr.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Contract(_) => "contract",
            Error::Degenerate(_) => "degenerate",
            Error::Internal(_) => "internal",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Csv(_) => "csv",
        }
    }
}
