use std::process::ExitCode;

/// Process exit codes.
pub mod code {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const BACKEND: u8 = 3;
    pub const ZERO_YIELD: u8 = 4;
    pub const INPUT: u8 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration file.
    #[error("configuration error: {0}")]
    Config(String),
    /// A malformed input file.
    #[error("invalid input: {0}")]
    Input(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("no output produced: {0}")]
    ZeroYield(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => code::CONFIG,
            CliError::Input(_) => code::INPUT,
            CliError::Backend(_) => code::BACKEND,
            CliError::ZeroYield(_) => code::ZERO_YIELD,
            CliError::Other(_) => code::FAILURE,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

pub type CliResult<T> = Result<T, CliError>;
