use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },
    #[error(
        "perceptron training diverged on carrier {carrier} (delta = {delta}, epochs = {epochs})"
    )]
    TrainingDiverged {
        carrier: usize,
        delta: f64,
        epochs: usize,
    },
    #[error("equalizer has not been trained")]
    Untrained,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dimension(expected: impl ToString, actual: impl ToString) -> Error {
    Error::Dimension {
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
