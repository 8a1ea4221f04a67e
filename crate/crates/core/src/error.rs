use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("quantity undefined: {0}")]
    Undefined(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("degenerate task: {0}")]
    DegenerateTask(String),

    #[error("solver did not converge after {iterations} iterations (gap {gap:.3e} bits)")]
    Solver { iterations: usize, gap: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
