use std::path::Path;

use teachgym_core::Error as CoreError;

/// Failures of the IO layer, sorted by who has to fix them.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Bad flags or configuration.
    #[error("{0}")]
    Usage(String),
    /// Input files that do not parse or describe invalid data.
    #[error("{0}")]
    Data(String),
    /// Everything else: failed writes, broken invariants.
    #[error("{0}")]
    Internal(String),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    /// Process exit code: 1 usage, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Data(_) => 2,
            AppError::Internal(_) => 3,
        }
    }

    pub fn read(path: &Path, e: std::io::Error) -> Self {
        AppError::Data(format!("cannot read {}: {e}", path.display()))
    }

    pub fn write(path: &Path, e: std::io::Error) -> Self {
        AppError::Internal(format!("cannot write {}: {e}", path.display()))
    }

    /// A JSON parse error located in `source`.
    pub fn json(source: &str, e: &serde_json::Error) -> Self {
        AppError::Data(format!(
            "{source}: line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            AppError::Usage(m) => AppError::Usage(format!("{what}: {m}")),
            AppError::Data(m) => AppError::Data(format!("{what}: {m}")),
            AppError::Internal(m) => AppError::Internal(format!("{what}: {m}")),
        }
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidConfig(_) | CoreError::InvalidCondition(_) => {
                AppError::Usage(e.to_string())
            }
            CoreError::Contract(_) => AppError::Internal(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}
