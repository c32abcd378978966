use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("degenerate channel {0}: max equals min over the fitting range")]
    DegenerateChannel(&'static str),
    #[error("normalization has not been fitted")]
    Unfitted,
    #[error("no running statistics: batchnorm used in eval mode before any training batch")]
    NoRunningStatistics,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("attack target {index} outside test split [{start}, {end})")]
    TargetOutsideTest { index: usize, start: usize, end: usize },
    #[error("bad format: {0}")]
    BadFormat(String),
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("truncated checkpoint: {0}")]
    Truncated(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("training diverged at epoch {epoch}, batch {batch}: {what}")]
    Diverged { epoch: usize, batch: usize, what: String },
}

impl Error {
    /// True for failures caused by numerics rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::Diverged { .. })
    }
}
