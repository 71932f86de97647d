use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite input value")]
    NonFinite,

    #[error("invalid FSQ levels: {0}")]
    InvalidLevels(String),

    #[error("digit {digit} out of range in dimension {dim}")]
    DigitOutOfRange { dim: usize, digit: i32 },

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: u64, size: u64 },

    #[error("empty sample set")]
    EmptySamples,

    #[error("ragged samples: expected dimension {expected}, found {found}")]
    RaggedSamples { expected: usize, found: usize },

    #[error("invalid bin count {0}")]
    InvalidBinCount(u32),

    #[error("invalid action range: {0}")]
    InvalidRange(String),

    #[error("token {token} outside the {segment} segment")]
    TokenOutOfSegment { token: u32, segment: &'static str },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("unknown action {0:?}")]
    UnknownAction(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("bound undefined: contraction factor alpha^W equals 1")]
    UndefinedBound,

    #[error("group of size {0} is too small, need at least 2")]
    GroupTooSmall(usize),

    #[error("empty ROI")]
    EmptyRoi,

    #[error("frame {width}x{height} smaller than window {window}")]
    FrameTooSmall { width: usize, height: usize, window: usize },

    #[error("empty temporal neighborhood")]
    EmptyNeighborhood,

    #[error("predictor failed at step {step}: {source}")]
    Predictor { step: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
