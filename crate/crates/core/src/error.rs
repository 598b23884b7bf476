use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("window index {index} out of range [{low}, {high}]")]
    WindowOutOfRange { index: usize, low: usize, high: usize },
    #[error("labels are degenerate: need at least one positive and one negative example")]
    DegenerateLabels,
    #[error("no positive labels to evaluate against")]
    NoPositives,
    #[error("column layout mismatch: model expects {expected:?}, got {found:?}")]
    ColumnMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("unknown heuristic `{0}`")]
    UnknownHeuristic(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from configuration rather than runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
