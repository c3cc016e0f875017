use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] sce_core::Error),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 config, 3 violated mathematical precondition, 4 resolution or
    /// validation failure, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        use sce_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_precondition() => 3,
            CliError::Core(E::InvalidArgument(_) | E::DimensionMismatch { .. } | E::OddDimension(_)) => 2,
            CliError::Core(_) | CliError::Validation(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    pub fn code(&self) -> ExitCode {
        ExitCode::from(self.exit_code())
    }
}

impl From<String> for CliError {
    fn from(s: String) -> Self {
        CliError::Config(s)
    }
}
