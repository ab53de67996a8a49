use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("chain has no modules")]
    EmptyChain,

    #[error("non-finite parameter `{0}`")]
    NonFiniteParameter(&'static str),

    #[error("simulation unstable at step {step} (t = {time} s): node {node} exceeded the blow-up bound")]
    Instability { step: usize, time: f64, node: usize },

    #[error("NARMA-{order} target diverged at step {step}")]
    NarmaDiverged { order: usize, step: usize },

    #[error("input signal: {0}")]
    InvalidSignal(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("target is constant; variance-normalized error is undefined")]
    ConstantTarget,

    #[error("node {label} (row {node}) has zero variance")]
    ZeroVarianceNode { node: usize, label: String },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("row {row}: expected {expected} fields, found {found}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}: cannot parse `{text}` in column {column}")]
    ParseValue {
        row: usize,
        column: usize,
        text: String,
    },

    #[error("row {row}: time is not strictly increasing")]
    NonMonotonicTime { row: usize },

    #[error("row {row}: time step deviates from the uniform sampling interval")]
    NonUniformTime { row: usize },

    #[error("row {row}, column {column}: non-finite value")]
    NonFiniteValue { row: usize, column: usize },

    #[error("no run supplied for payload mass {0} g")]
    MissingMass(f64),

    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
