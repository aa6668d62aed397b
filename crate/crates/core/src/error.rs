use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("subpopulation id {id} out of range (N = {count})")]
    BadSubpop { id: usize, count: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("training diverged at update {step}: loss is not finite")]
    Divergence { step: usize },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("feature kind does not match: {0}")]
    FeatureKind(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        domain(format!("{name} = {p} is not in [0, 1]"))
    }
}
