use std::path::PathBuf;

use scalefit_core::RecordError;

/// Problems with input files, flags, or output locations. The CLI maps these
/// to exit code 1; everything else is an analysis failure.
#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: row {row}, column {column}: cannot parse {value:?}", path.display())]
    Cell { path: PathBuf, row: usize, column: String, value: String },
    #[error("{}", path.display())]
    Record {
        path: PathBuf,
        #[source]
        source: RecordError,
    },
    #[error("{}: file holds no records", path.display())]
    Empty { path: PathBuf },
    #[error("{}: header needs N, D and seed columns and at least one metric", path.display())]
    Header { path: PathBuf },
    #[error("{}: expected a JSON array of run objects", path.display())]
    RunsShape { path: PathBuf },
    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

impl InputError {
    pub fn usage(message: impl Into<String>) -> Self {
        InputError::Usage(message.into())
    }
}
