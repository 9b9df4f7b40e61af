use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_width}x{expected_height}, got {width}x{height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        width: usize,
        height: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite sample in {0}")]
    NonFinite(&'static str),

    #[error("zero-variance input; correlation normalization is undefined")]
    ZeroVariance,

    #[error("degenerate quadrilateral: warped block is not convex with positive area")]
    DegenerateWarp,

    #[error("homography is singular (|det| = {0:e})")]
    Singular(f64),

    #[error("reference {ref_width}x{ref_height} does not cover the region [{x0}, {x1}) x [{y0}, {y1})")]
    ReferenceTooSmall {
        ref_width: usize,
        ref_height: usize,
        x0: i64,
        x1: i64,
        y0: i64,
        y1: i64,
    },

    #[error("frame {width}x{height} is smaller than the {block}x{block} analysis block")]
    FrameTooSmall {
        width: usize,
        height: usize,
        block: usize,
    },

    #[error("too few frames: need at least {need}, got {got}")]
    TooFewFrames { need: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("every candidate transform was degenerate")]
    AllCandidatesDegenerate,

    #[error("exhaustive search window {window} exceeds the limit {limit} for this variant")]
    WindowTooLarge { window: usize, limit: usize },

    #[error("fingerprint format: {0}")]
    Format(String),

    #[error("frame source: {0}")]
    FrameSource(String),

    #[error("image decode: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Empty(_) => "empty",
            Error::NonFinite(_) => "non_finite",
            Error::ZeroVariance => "zero_variance",
            Error::DegenerateWarp => "degenerate_warp",
            Error::Singular(_) => "singular",
            Error::ReferenceTooSmall { .. } => "reference_too_small",
            Error::FrameTooSmall { .. } => "frame_too_small",
            Error::TooFewFrames { .. } => "too_few_frames",
            Error::InvalidConfig(_) => "invalid_config",
            Error::AllCandidatesDegenerate => "all_candidates_degenerate",
            Error::WindowTooLarge { .. } => "window_too_large",
            Error::Format(_) => "format",
            Error::FrameSource(_) => "frame_source",
            Error::Image(_) => "image",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
