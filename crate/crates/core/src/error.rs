use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed journal for atm {atm_id} at ts {ts}: {reason}")]
    MalformedJournal {
        atm_id: String,
        ts: i64,
        reason: String,
    },

    #[error("timestamp {ts} outside horizon [{start}, {end})")]
    OutOfRange { ts: i64, start: i64, end: i64 },

    #[error("cannot fit {family}: {reason}")]
    Fit { family: &'static str, reason: String },

    #[error("degenerate fit for {0}: zero variance")]
    DegenerateFit(&'static str),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("date {0} not covered by the calendar")]
    DateNotCovered(String),

    #[error("inputs do not cover the same horizon; missing: {}", .missing.join(", "))]
    HorizonMismatch { missing: Vec<String> },

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("minority class has {got} instances, SMOTE with k={k} needs at least {}", .k + 1)]
    MinorityTooSmall { k: usize, got: usize },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("selection dataset is empty")]
    EmptyDsel,

    #[error("k={k} exceeds selection dataset size {size}")]
    NeighborhoodTooLarge { k: usize, size: usize },

    #[error("prediction/truth keys do not align, e.g. {}", .examples.join("; "))]
    KeyMismatch { examples: Vec<String> },

    #[error("invalid pool: {0}")]
    InvalidPool(String),
}
