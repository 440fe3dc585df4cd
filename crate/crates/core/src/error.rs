use thiserror::Error;

use crate::model::InstructionId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("instruction `{0}` has no µops in the mapping")]
    UnmappedInstruction(InstructionId),

    #[error("item `{0}` is not mapped to any ports")]
    UnmappedItem(String),

    #[error("{ports} ports exceed the supported maximum of {max}")]
    PortCountExceeded { ports: usize, max: usize },

    #[error("invalid mapping: {0}")]
    InvalidMapping(String),

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("instruction set is empty")]
    EmptyIsa,

    #[error("need at least {needed} instructions, got {got}")]
    TooFewInstructions { needed: usize, got: usize },

    #[error("no singleton throughput for instruction `{0}`")]
    MissingThroughput(InstructionId),

    #[error("throughput {value} for experiment {experiment} is not positive and finite")]
    NonPositiveThroughput { experiment: String, value: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("measured value {0} is not positive")]
    NonPositiveMeasurement(f64),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("one side has zero variance")]
    DegenerateVariance,

    #[error("mismatched parents: {0}")]
    MismatchedConfig(String),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
