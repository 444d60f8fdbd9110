use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point has non-positive depth z = {0}")]
    NonPositiveDepth(f64),

    #[error("uncertainty parameter must be positive, got {0}")]
    NonPositiveUncertainty(f64),

    #[error("empty input")]
    EmptyInput,

    #[error("no valid paired frame within window (t = {t}, window = {window}, length = {len})")]
    EmptyWindow { t: usize, window: usize, len: usize },

    #[error("degenerate PnP problem: {0}")]
    Degenerate(String),

    #[error("ground truth required for initialization mode {0}")]
    MissingGroundTruth(&'static str),

    #[error("forward axis is parallel to the up axis")]
    DegenerateHeading,

    #[error("need at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("frame misalignment: {0}")]
    FrameMismatch(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
