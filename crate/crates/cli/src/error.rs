use duallife::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("assumption failure: {0}")]
    Assumption(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("verification did not pass: {0}")]
    Verify(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Assumption(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
            CliError::Verify(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::DegenerateMarket | Error::InvalidSimulation(_) => {
                CliError::Config(e.to_string())
            }
            Error::InvalidPreference(_) | Error::AssumptionViolation(_) => CliError::Assumption(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}
