use thiserror::Error;

/// Errors raised by the activity-space engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry for entity `{id}`: {reason}")]
    InvalidGeometry { id: String, reason: String },

    #[error("duplicate entity id `{0}`")]
    DuplicateId(String),

    #[error("unknown entity id `{0}`")]
    UnknownEntity(String),

    #[error("the polygon-network space has no entities")]
    EmptySpace,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input data: {0}")]
    Data(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn geometry(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidGeometry {
            id: id.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
