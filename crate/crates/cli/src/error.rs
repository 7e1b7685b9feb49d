use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments: exit status 2.
    #[error("{0}")]
    Usage(String),
    /// A well-formed request that could not be completed: exit status 1.
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) | CliError::Io(_) => 1,
        }
    }

    /// For errors raised while interpreting arguments.
    pub fn usage(e: impl std::fmt::Display) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<collatz_core::Error> for CliError {
    fn from(e: collatz_core::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
