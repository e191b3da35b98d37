use thiserror::Error;

use crate::charact::TargetDemand;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("angle is undefined between coincident positions")]
    UndefinedAngle,

    #[error("corpus contains no digraphs")]
    EmptyCorpus,

    #[error("instance too large for exhaustive search: m = {m} (limit {limit})")]
    SizeGuard { m: usize, limit: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("protocol stalled: {} demand(s) could not be presented", dropped.len())]
    ProtocolStall { dropped: Vec<TargetDemand> },

    #[error("model has no fitted bins to predict from")]
    ModelUnusable,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl std::fmt::Display) -> Self {
        Error::Parse {
            line,
            message: msg.to_string(),
        }
    }
}
