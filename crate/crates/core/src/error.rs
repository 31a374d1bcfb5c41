use alloc::boxed::Box;
use alloc::string::String;

use crate::landscape::PotentialNet;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("timestamp {0} precedes the binning epoch")]
    BeforeEpoch(String),
    #[error("time anchors are degenerate")]
    DegenerateAnchors,
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("linear system is numerically singular (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("duplicate value for person {person} bin {bin} target {target}")]
    DuplicateCell {
        person: String,
        bin: i64,
        target: String,
    },
    #[error("hold-out mask left column {0} without observations")]
    ColumnMasked(usize),
    #[error("time window {0} holds no samples")]
    EmptyWindow(usize),
    #[error("horizon of {0} bins exceeds every trajectory")]
    HorizonTooLong(usize),
    #[error("contingency table has an empty expected cell")]
    ZeroExpected,
    #[error("training diverged in epoch {epoch}")]
    Diverged {
        epoch: usize,
        checkpoint: Box<PotentialNet>,
    },
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
