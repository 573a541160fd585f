use thiserror::Error;

/// Errors produced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("IoU is undefined when both regions are empty")]
    UndefinedIou,

    #[error("mAP is undefined: the ground truth holds no instances")]
    UndefinedMap,

    #[error("numeric range error: {0}")]
    NumericRange(String),

    #[error("point ({x:.3}, {y:.3}) lies outside the camera field of view")]
    OutOfFov { x: f64, y: f64 },

    #[error("projection loses field of view: {0}")]
    LossOfFov(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateGeometry(msg.into())
    }

    /// True for errors caused by malformed or inconsistent input data rather
    /// than by a caller violating an API contract.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Format(_)
                | Error::Schema { .. }
                | Error::UndefinedMap
                | Error::UndefinedIou
                | Error::DegenerateGeometry(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
