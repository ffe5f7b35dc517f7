use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unresolvable delta path `{0}`")]
    UnresolvedPath(String),

    #[error("delta entry `{path}`: {reason}")]
    InvalidDeltaEntry { path: String, reason: String },

    #[error("delta kind does not match its base object")]
    DeltaKindMismatch,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("record format: {0}")]
    RecordFormat(String),

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("channel `{0}` missing from one of the records")]
    MissingChannel(String),

    #[error("record has no trajectory for actor `{0}`")]
    MissingTrajectory(String),

    #[error("comparison window [0, {window}] exceeds record `{record}` (ends at {end})")]
    WindowExceedsRecord { window: f64, record: String, end: f64 },

    #[error("no accident signature: {0}")]
    NoAccidentSignature(String),

    #[error("search failed: {0}")]
    SearchFailed(String),

    #[error("pinpointing failed: {0}")]
    PinpointFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
