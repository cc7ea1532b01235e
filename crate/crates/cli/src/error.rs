use std::path::PathBuf;

use qpm_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("missing config section [{0}]")]
    MissingSection(String),

    #[error("config [{section}]: {reason}")]
    Config { section: String, reason: String },

    #[error("{0}")]
    Core(#[from] CoreError),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::MissingSection(_) | CliError::Config { .. } => 2,
            CliError::Core(e) => match e {
                CoreError::Invalid { .. } => 2,
                CoreError::Numeric { .. } | CoreError::OutOfRange { .. } | CoreError::Shape { .. } => 3,
                CoreError::Parse(_) | CoreError::Io(_) | CoreError::Csv(_) | CoreError::Json(_) => 4,
            },
            CliError::Io { .. } => 4,
        }
    }

    /// Message naming the failing operation for numerical errors.
    pub fn report(&self) -> String {
        match self {
            CliError::Core(CoreError::OutOfRange { .. }) => format!("dispersion evaluation: {self}"),
            _ => self.to_string(),
        }
    }
}
