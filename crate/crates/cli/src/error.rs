use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or arguments; exit code 1.
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] conceptbench::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("plot: {0}")]
    Plot(String),
    #[error("run {run_id} failed: {reason}")]
    Failed { run_id: String, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Core(conceptbench::Error::Config(_)) => 1,
            _ => 2,
        }
    }
}
