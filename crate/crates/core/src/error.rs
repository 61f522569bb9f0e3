use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Location of a problem inside an input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub file: String,
    /// 1-based line number as it appears in the file (header is line 1).
    pub row: usize,
    pub column: Option<String>,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} row {}", self.file, self.row)?;
        if let Some(col) = &self.column {
            write!(f, " column `{col}`")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error at {at}: {message}")]
    Validation { at: Location, message: String },

    #[error("invalid cohort: {0}")]
    InvalidCohort(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid k = {k} for {n} items")]
    InvalidK { k: usize, n: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("sequence length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("empty group")]
    EmptyGroup,

    #[error("cluster {0} has no members")]
    EmptyCluster(usize),

    #[error("pipeline is not trained: {0}")]
    UntrainedPipeline(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(file: &str, row: usize, column: Option<&str>, message: impl Into<String>) -> Self {
        Error::Validation {
            at: Location { file: file.to_string(), row, column: column.map(str::to_string) },
            message: message.into(),
        }
    }

    /// True for errors caused by bad input data rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. }
                | Error::InvalidCohort(_)
                | Error::InvalidConfig(_)
                | Error::InvalidSpec(_)
                | Error::Csv(_)
        )
    }
}
