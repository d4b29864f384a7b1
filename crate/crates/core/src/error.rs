use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("index {index} out of range for {what} of size {size}")]
    Index {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("argument outside of domain: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("objective is not deterministic: {first} then {second}")]
    Determinism { first: f64, second: f64 },

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("non-finite loss at step {step}: samples {sample_ids:?} with losses {losses:?}")]
    Diverged {
        step: usize,
        sample_ids: Vec<String>,
        losses: Vec<f64>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by bad user input (files, configs, arguments) rather
    /// than a failure during a run.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Corpus(_) | Error::Config(_) | Error::Checkpoint(_) | Error::Argument(_)
        )
    }
}
