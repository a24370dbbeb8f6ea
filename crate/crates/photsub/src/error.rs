use std::path::PathBuf;

use photsub_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config: {field}: {message}")]
    Config { field: String, message: String },
    #[error("{context}: {source}")]
    Numerical { context: String, source: CoreError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("reports are not comparable: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, RunError>;

impl RunError {
    pub fn config(field: impl Into<String>, message: impl ToString) -> Self {
        Self::Config { field: field.into(), message: message.to_string() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Self::Format { path: path.into(), message: message.to_string() }
    }

    /// Core errors raised while running numerics. Parameter errors are
    /// reported as config problems; floors and leaks as numerical failures.
    pub fn core(context: impl Into<String>, source: CoreError) -> Self {
        if is_numerical_floor(&source) {
            Self::Numerical { context: context.into(), source }
        } else {
            Self::Config { field: context.into(), message: source.to_string() }
        }
    }

    /// Process exit code: 2 for invalid input, 3 for numerical-floor failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Format { .. } | Self::Mismatch(_) => 2,
            Self::Numerical { .. } => 3,
            Self::Io { .. } => 1,
        }
    }
}

fn is_numerical_floor(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::CutoffTooSmall { .. }
            | CoreError::DegenerateHerald { .. }
            | CoreError::IdlerLeakage { .. }
            | CoreError::ZeroTrace
            | CoreError::GridTooSmall { .. }
            | CoreError::ZeroVariance
    )
}
