use std::path::PathBuf;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(thiserror::Error, Debug)]
pub enum AppError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: checksum mismatch (manifest {expected}, file {actual})")]
    Checksum { path: PathBuf, expected: String, actual: String },
}

impl AppError {
    /// Process exit status: 2 for configuration problems, 3 for numerical
    /// failures, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Json { .. } | AppError::Checksum { .. } => 2,
            AppError::Numerical(_) => 3,
            AppError::Io { .. } | AppError::Csv { .. } => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> AppError {
        let path = path.into();
        move |source| AppError::Io { path, source }
    }
}

impl From<physreg_core::Error> for AppError {
    fn from(e: physreg_core::Error) -> Self {
        use physreg_core::Error as E;
        match e {
            E::BlowUp { .. } => AppError::Numerical(e.to_string()),
            _ => AppError::Config(e.to_string()),
        }
    }
}
