use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("train fraction {0} is outside (0, 1)")]
    FractionOutOfRange(f64),
    #[error("feature value {value} at row {row}, column {column} is outside [0, 1]")]
    Unnormalized { row: usize, column: usize, value: f64 },
    #[error("input bit-width must be in 1..=16, got {0}")]
    InputBits(u32),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("mask does not match the model: {0}")]
    ShapeMismatch(String),
    #[error("chromosome has {got} genes, layout expects {expected}")]
    ChromosomeLength { expected: usize, got: usize },
    #[error("cost matrix admits no feasible pairing")]
    NoFeasibleAssignment,
    #[error("argmax needs at least two outputs, model has {0}")]
    TooFewOutputs(usize),
    #[error("`{0}` is not a valid HDL identifier")]
    InvalidIdentifier(String),
    #[error("input vector has {got} bits, netlist expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed netlist: {0}")]
    MalformedNetlist(String),
}

pub type Result<T> = core::result::Result<T, Error>;
