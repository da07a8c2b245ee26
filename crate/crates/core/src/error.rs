use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("window radius {radius} exceeds the addressable capacity ({limit})")]
    Capacity { radius: u64, limit: u64 },

    #[error("window radius {window} is too small: it must exceed {required:.3}")]
    WindowTooSmall { window: u32, required: f64 },

    #[error("rectangle [{x0},{x1}]x[{y0},{y1}] is not inside the window of radius {window}")]
    RectOutsideWindow {
        x0: i32,
        x1: i32,
        y0: i32,
        y1: i32,
        window: u32,
    },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("strip coefficient diverges: {0}")]
    Divergent(String),

    #[error("theta table is empty")]
    EmptyTable,

    #[error("malformed theta table: {0}")]
    MalformedTable(String),

    #[error("unsupported theta table version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("the bottom cluster does not span the strip")]
    NoCrossing,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
