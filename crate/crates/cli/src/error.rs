use thiserror::Error;

/// Process exit status for configuration problems.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NO_EQUILIBRIUM: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no equilibrium: {0}")]
    NoEquilibrium(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::NoEquilibrium(_) => EXIT_NO_EQUILIBRIUM,
            CliError::Verification(_) => EXIT_VERIFY,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Config(m) | CliError::NoEquilibrium(m) | CliError::Verification(m) => m.clone(),
            CliError::Io(e) => e.to_string(),
        }
    }
}

impl From<fdnash::Error> for CliError {
    fn from(e: fdnash::Error) -> Self {
        match e {
            fdnash::Error::NoEquilibrium(_) | fdnash::Error::OutOfBand { .. } => CliError::NoEquilibrium(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
