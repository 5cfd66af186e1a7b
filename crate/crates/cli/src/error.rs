use thiserror::Error;

/// Exit code for a check that ran and failed.
pub const EXIT_VERIFICATION: i32 = 1;
/// Exit code for bad arguments, unreadable or invalid scenarios.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] auctionlab_core::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot write csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(auctionlab_core::Error::GuaranteeViolated(_)) => EXIT_VERIFICATION,
            _ => EXIT_USAGE,
        }
    }
}
