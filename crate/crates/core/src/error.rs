use alloc::string::String;

use crate::geometry::Point;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid task geometry: {0}")]
    InvalidTask(String),
    #[error("{k} components requested but only {samples} samples available")]
    TooManyComponents { k: usize, samples: usize },
    #[error("frame {frame} has a singular transformation")]
    SingularFrame { frame: usize },
    #[error("component {component} has a non-invertible covariance")]
    SingularComponent { component: usize },
    #[error("no demonstration carries grab/release action marks")]
    NoActionMarks,
    #[error("no demonstrations")]
    NoDemonstrations,
    #[error("test item {0} appears more than once")]
    DuplicateTestItem(usize),
    #[error("test item {0} has no realization")]
    MissingTestItem(usize),
    #[error("test item {item} is out of range for a test set of {size}")]
    TestItemOutOfRange { item: usize, size: usize },
    #[error("no collision-free path from start {start}")]
    PathGeneration { start: Point },
    #[error("condition not allowed: {0}")]
    InvalidCondition(String),
    #[error("session is stopped")]
    SessionStopped,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("replay diverged at step {step}: {detail}")]
    ReplayDivergence { step: usize, detail: String },
    #[error("unsupported log schema version {found} (supported: {supported})")]
    SchemaVersion { found: u32, supported: u32 },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
