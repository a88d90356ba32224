use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error: {0}")]
    Parse(String),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("cannot estimate table: {0}")]
    Estimation(String),

    #[error("index out of bounds: {0}")]
    Bounds(String),

    #[error("selection error: {0}")]
    Selection(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("privacy budget exceeded: {0}")]
    Budget(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("config hash mismatch in {dir}: existing results were produced by a different configuration")]
    ConfigMismatch { dir: PathBuf },

    #[error("replica {replica}, {stage}: {source}")]
    Stage {
        replica: usize,
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable identifier, used by the CLI error report.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse(_) => "parse",
            Error::Schema(_) => "schema_violation",
            Error::Config(_) => "configuration",
            Error::Parameter(_) => "parameter",
            Error::Estimation(_) => "estimation",
            Error::Bounds(_) => "bounds",
            Error::Selection(_) => "selection",
            Error::UndefinedMetric(_) => "undefined_metric",
            Error::Budget(_) => "budget",
            Error::Unknown { .. } => "unknown_name",
            Error::ConfigMismatch { .. } => "config_mismatch",
            Error::Stage { source, .. } => source.kind(),
            Error::Serde(_) => "serialization",
        }
    }

    pub(crate) fn at_stage(self, replica: usize, stage: impl Into<String>) -> Self {
        Error::Stage {
            replica,
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
