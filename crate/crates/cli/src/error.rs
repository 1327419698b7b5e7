use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config keys or values, missing inputs, mismatched headers.
    #[error("config error: {0}")]
    Config(String),

    /// More than the tolerated share of replications failed.
    #[error("{0}")]
    Failures(String),

    /// Non-numeric, missing or misaligned cells in an input file.
    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Library(coherit::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failures(_) => 3,
            CliError::Data(_) => 4,
            CliError::Io(_) | CliError::Library(_) => 1,
        }
    }
}

impl From<coherit::Error> for CliError {
    fn from(e: coherit::Error) -> Self {
        use coherit::Error as E;
        match e {
            E::TooManyFailures { .. } => CliError::Failures(e.to_string()),
            E::InvalidParameter(_) | E::InvalidRho(_) | E::InfeasibleSupports { .. } => CliError::Config(e.to_string()),
            E::ZeroColumn(_) | E::NonFinite(_) | E::DimensionMismatch(_) => CliError::Data(e.to_string()),
            other => CliError::Library(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
