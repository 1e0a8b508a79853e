use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] thinbasis_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 config, 3 budget, 4 invariant, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use thinbasis_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Domain(_) | E::Hypothesis(_)) => 2,
            CliError::Core(E::Budget { .. }) => 3,
            CliError::Core(E::Invariant(_)) => 4,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
