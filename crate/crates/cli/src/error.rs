use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input from the user: missing files, invalid flags, unknown columns.
    #[error("{0}")]
    User(String),
    #[error(transparent)]
    Core(#[from] decvae::Error),
    #[error("{0}")]
    Internal(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use decvae::Error as E;
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
            CliError::Core(e) => match e {
                E::Shape { .. } | E::NonScalarLoss(_) | E::MissingGradient(_) | E::NonFinite(_) => 2,
                _ => 1,
            },
        }
    }
}

pub(crate) fn user(msg: impl Into<String>) -> CliError {
    CliError::User(msg.into())
}
