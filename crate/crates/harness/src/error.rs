use thiserror::Error;

/// Problems with a saved model's format version.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VersionError {
    #[error("model file has no `format_version` field")]
    MissingVersion,
    #[error("unsupported model format version {found} (this build reads {supported})")]
    Unsupported { found: u64, supported: u64 },
    #[error("model file (format version {version}) is missing required field `{field}`")]
    MissingField { version: u64, field: String },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] ratkrig::Error),

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error(transparent)]
    Version(#[from] VersionError),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
