use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("group too small: need at least 2 rewards, got {0}")]
    GroupTooSmall(usize),

    #[error("insufficient budget: {prompts} prompts x pilot {pilot} needs {required}, total is {total}")]
    InsufficientBudget {
        prompts: usize,
        pilot: usize,
        required: usize,
        total: usize,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid reward config: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
}
