use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(catbench_core::Error),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("self-test failed: {0}")]
    SelfTest(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) | CliError::SelfTest(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<catbench_core::Error> for CliError {
    /// Rejected parameter values come from the configuration; everything else is numerical.
    fn from(e: catbench_core::Error) -> Self {
        match e {
            catbench_core::Error::InvalidParameter(msg) => CliError::Config(msg),
            other => CliError::Numerical(other),
        }
    }
}
