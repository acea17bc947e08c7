use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("malformed {what} at byte offset {offset}: {reason}")]
    Format {
        what: &'static str,
        offset: u64,
        reason: String,
    },

    #[error(
        "{what} version mismatch: file has version {found}, this build reads version {expected}"
    )]
    VersionMismatch {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Divergence {
        epoch: usize,
        batch: usize,
        loss: f64,
    },

    #[error("degenerate labels: {0}")]
    Degenerate(String),

    #[error("mutant budget exhausted: {accepted} valid of {attempts} attempts (yield {yield_rate:.3}), {wanted} wanted")]
    BudgetExhausted {
        accepted: usize,
        attempts: usize,
        wanted: usize,
        yield_rate: f64,
    },

    #[error("sample {id}: {source}")]
    Sample {
        id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("missing stage artifacts: {}", .0.join(", "))]
    MissingStages(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn for_sample(self, id: u64) -> Self {
        Error::Sample {
            id,
            source: Box::new(self),
        }
    }
}
