use std::path::PathBuf;

use featorder_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 2;
    pub const VALIDATION: i32 = 3;
    pub const NUMERIC: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// `row` is the 1-based data row (the header is not counted), `col` the
    /// 0-based column index.
    #[error("{}: row {row}, column {col} ('{column}'): {message}", path.display())]
    Parse { path: PathBuf, row: u64, col: usize, column: String, message: String },
    #[error("{}: no column named '{name}'", path.display())]
    UnknownLabelColumn { path: PathBuf, name: String },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => exit::IO,
            CliError::Parse { .. }
            | CliError::UnknownLabelColumn { .. }
            | CliError::Format { .. } | CliError::Usage(_) => exit::VALIDATION,
            CliError::Core(e) if e.is_numeric() => exit::NUMERIC,
            CliError::Core(_) => exit::VALIDATION,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
