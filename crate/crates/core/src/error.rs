use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),

    #[error("unsupported pixel format: {0}")]
    Format(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },

    #[error("value {value} at pixel ({x}, {y}) is outside the mask palette")]
    OutOfPalette { value: u8, x: u32, y: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training data contains a single class ({0})")]
    SingleClass(String),

    #[error("net is unresolvable: mesh pitch of {pitch_px:.3} px is below 2 px")]
    Unresolvable { pitch_px: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no frames accepted after filtering ({total} total)")]
    NoAcceptedFrames { total: usize },

    #[error("duplicate dataset entry `{0}`")]
    DuplicateEntry(String),

    #[error("coverage target {target:.3} is unreachable: {reason}")]
    Unreachable { target: f64, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Codec(_) => "codec",
            Error::Format(_) => "format",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::OutOfPalette { .. } => "out-of-palette",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::SingleClass(_) => "single-class",
            Error::Unresolvable { .. } => "unresolvable",
            Error::InsufficientData(_) => "insufficient-data",
            Error::NoAcceptedFrames { .. } => "no-accepted-frames",
            Error::DuplicateEntry(_) => "duplicate-entry",
            Error::Unreachable { .. } => "unreachable",
            Error::Config(_) => "config",
            Error::Parse(_) => "parse",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
