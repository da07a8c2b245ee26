use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error(transparent)]
    Core(#[from] poisperc_core::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("worker pool: {0}")]
    Pool(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;
